//! Time integration of the membrane equation as a first-order system in
//! `(φ, ψ = φ_t)`: classical RK4 in time, 4th-order stencils in space.

mod initial;
mod kernel;
mod trajectory;

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::reduce::CHUNK;
use crate::fields::{derivative, GridSpec, ScalarField};
use crate::membrane::{DerivativeBundle, Formulation};

pub use initial::{initial_state, InitialData, Profile, GAUSSIAN_FLUSH, GAUSSIAN_SUPPORT_WIDTHS};
pub use trajectory::{scale_solution, Trajectory};

use kernel::Geometry;

pub const HISTORY_DEPTH: usize = 5;

/// Support guard threshold relative to the data amplitude.
pub const SUPPORT_GUARD_RELATIVE: f64 = 1e-14;

/// Values below this magnitude are stored as exact zeros after each step.
pub const FLUSH_TO_ZERO: f64 = 1e-250;

#[derive(Clone, Debug)]
pub struct Slice {
    pub t: f64,
    pub phi: ScalarField,
    pub psi: ScalarField,
}

/// Evolution pair `(φ, ψ)` at time `t` plus the most recent slices.
///
/// `amplitude` is the data size `ε` the support guard is measured against.
#[derive(Clone, Debug)]
pub struct State {
    t: f64,
    phi: ScalarField,
    psi: ScalarField,
    amplitude: f64,
    history: VecDeque<Slice>,
}

impl State {
    pub fn new(t: f64, phi: ScalarField, psi: ScalarField, amplitude: f64) -> Result<Self> {
        phi.check_same_grid(&psi)?;
        Ok(Self {
            t,
            phi,
            psi,
            amplitude,
            history: VecDeque::new(),
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn phi(&self) -> &ScalarField {
        &self.phi
    }

    pub fn psi(&self) -> &ScalarField {
        &self.psi
    }

    pub fn grid(&self) -> &GridSpec {
        self.phi.grid()
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// Retained slices, oldest first; after a step the newest one is the
    /// current state.
    pub fn history(&self) -> &VecDeque<Slice> {
        &self.history
    }

    /// Moves the state to time `t`, dropping the history.
    pub fn at_time(mut self, t: f64) -> Self {
        self.t = t;
        self.history.clear();
        self
    }

    /// The same data with `ψ` negated: evolving it forward by `τ` gives the
    /// original solution at `t - τ` (the equation is invariant under
    /// `t ↦ -t`).
    pub fn time_reversed(&self) -> Result<Self> {
        State::new(self.t, self.phi.clone(), self.psi.scaled(-1.0)?, self.amplitude)
    }

    fn push_history(&mut self) {
        if let Some(last) = self.history.back() {
            let prev_dt = self.history.len().checked_sub(2).map(|k| last.t - self.history[k].t);
            let dt = self.t - last.t;
            let uniform = prev_dt.is_none_or(|p| (dt - p).abs() <= 1e-12 * p.abs().max(dt.abs()));
            if !(dt > 0.0 && uniform) {
                self.history.clear();
            }
        }
        let slot = if self.history.len() == HISTORY_DEPTH {
            let mut old = self.history.pop_front().expect("history is full");
            old.t = self.t;
            old.phi.values_mut().copy_from_slice(self.phi.values());
            old.psi.values_mut().copy_from_slice(self.psi.values());
            old
        } else {
            Slice {
                t: self.t,
                phi: self.phi.clone(),
                psi: self.psi.clone(),
            }
        };
        self.history.push_back(slot);
    }

    /// Derivative bundle of the current slice with `φ_tt` from the equation,
    /// `φ_ti = ∂_i ψ` and spatial derivatives from the core stencils.
    pub fn bundle(&self, q_max: f64) -> Result<DerivativeBundle> {
        let n = self.grid().dim();
        let acc = acceleration(self, q_max)?;
        let grad: Vec<ScalarField> = (0..n)
            .map(|a| derivative(&self.phi, a, 1))
            .collect::<Result<_>>()?;
        let mut rows = vec![vec![acc.clone(); n + 1]; n + 1];
        for i in 0..n {
            let dpsi = derivative(&self.psi, i, 1)?;
            rows[0][i + 1] = dpsi.clone();
            rows[i + 1][0] = dpsi;
            rows[i + 1][i + 1] = derivative(&self.phi, i, 2)?;
            for j in i + 1..n {
                let mixed = derivative(&grad[i], j, 1)?;
                rows[i + 1][j + 1] = mixed.clone();
                rows[j + 1][i + 1] = mixed;
            }
        }
        DerivativeBundle::new(self.phi.clone(), self.psi.clone(), grad, Some(rows))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub cfl: f64,
    pub q_max: f64,
    /// Width of the boundary band watched by the support guard; `None`
    /// means 5% of the half-width.
    pub support_margin: Option<f64>,
    pub formulation: Formulation,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            cfl: 0.4,
            q_max: 0.9,
            support_margin: None,
            formulation: Formulation::NullForm,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::config("time.cfl", format!("{} not in (0, 1]", self.cfl)));
        }
        if !(self.q_max > 0.0 && self.q_max < 1.0) {
            return Err(Error::config("solver.q_max", format!("{} not in (0, 1)", self.q_max)));
        }
        if let Some(m) = self.support_margin {
            if !(m.is_finite() && m >= 0.0) {
                return Err(Error::config("solver.support_margin", "must be >= 0"));
            }
        }
        Ok(())
    }

    pub fn margin_for(&self, grid: &GridSpec) -> f64 {
        self.support_margin.unwrap_or(0.05 * grid.extent())
    }
}

/// `φ_tt` at every node of the current slice.
pub fn acceleration(state: &State, q_max: f64) -> Result<ScalarField> {
    let grid = *state.grid();
    let mut out = vec![0.0; grid.len()];
    kernel::acceleration_into(
        &Geometry::new(&grid),
        state.phi.values(),
        state.psi.values(),
        q_max,
        &mut out,
    )
    .map_err(|e| e.at_time(state.t))?;
    ScalarField::new(grid, out, "phi_tt")
}

/// `∂_t φ_tt` along the flow, obtained by differentiating the update rule.
pub fn acceleration_rate(state: &State, acc: &ScalarField, q_max: f64) -> Result<ScalarField> {
    let grid = *state.grid();
    let mut out = vec![0.0; grid.len()];
    kernel::acceleration_rate_into(
        &Geometry::new(&grid),
        state.phi.values(),
        state.psi.values(),
        acc.values(),
        q_max,
        &mut out,
    )
    .map_err(|e| e.at_time(state.t))?;
    ScalarField::new(grid, out, "phi_ttt")
}

/// Scratch arrays for one RK4 step.
pub(crate) struct Workspace {
    geometry: Geometry,
    acc: Vec<f64>,
    phi_stage: Vec<f64>,
    psi_stage: Vec<f64>,
    phi_sum: Vec<f64>,
    psi_sum: Vec<f64>,
}

impl Workspace {
    pub(crate) fn new(grid: &GridSpec) -> Self {
        let len = grid.len();
        Self {
            geometry: Geometry::new(grid),
            acc: vec![0.0; len],
            phi_stage: vec![0.0; len],
            psi_stage: vec![0.0; len],
            phi_sum: vec![0.0; len],
            psi_sum: vec![0.0; len],
        }
    }
}

fn flush(v: f64) -> f64 {
    if v.abs() < FLUSH_TO_ZERO {
        0.0
    } else {
        v
    }
}

fn rk4_step(state: &mut State, dt: f64, q_max: f64, ws: &mut Workspace) -> Result<()> {
    let t = state.t;
    let phi = state.phi.values();
    let psi = state.psi.values();
    let g = ws.geometry;

    kernel::acceleration_into(&g, phi, psi, q_max, &mut ws.acc).map_err(|e| e.at_time(t))?;
    let half = 0.5 * dt;
    ws.phi_sum
        .par_chunks_mut(CHUNK)
        .zip(ws.psi_sum.par_chunks_mut(CHUNK))
        .zip(ws.phi_stage.par_chunks_mut(CHUNK))
        .zip(ws.psi_stage.par_chunks_mut(CHUNK))
        .enumerate()
        .for_each(|(c, (((fs, ps), fst), pst))| {
            let base = c * CHUNK;
            for k in 0..fs.len() {
                let i = base + k;
                fs[k] = psi[i];
                ps[k] = ws.acc[i];
                fst[k] = phi[i] + half * psi[i];
                pst[k] = psi[i] + half * ws.acc[i];
            }
        });

    for (stage_dt, stage_t) in [(half, t + half), (dt, t + half)] {
        kernel::acceleration_into(&g, &ws.phi_stage, &ws.psi_stage, q_max, &mut ws.acc)
            .map_err(|e| e.at_time(stage_t))?;
        let acc = &ws.acc;
        ws.phi_sum
            .par_chunks_mut(CHUNK)
            .zip(ws.psi_sum.par_chunks_mut(CHUNK))
            .zip(ws.phi_stage.par_chunks_mut(CHUNK))
            .zip(ws.psi_stage.par_chunks_mut(CHUNK))
            .enumerate()
            .for_each(|(c, (((fs, ps), fst), pst))| {
                let base = c * CHUNK;
                for k in 0..fs.len() {
                    let i = base + k;
                    let kphi = pst[k];
                    let kpsi = acc[i];
                    fs[k] += 2.0 * kphi;
                    ps[k] += 2.0 * kpsi;
                    fst[k] = phi[i] + stage_dt * kphi;
                    pst[k] = psi[i] + stage_dt * kpsi;
                }
            });
    }

    kernel::acceleration_into(&g, &ws.phi_stage, &ws.psi_stage, q_max, &mut ws.acc)
        .map_err(|e| e.at_time(t + dt))?;
    let sixth = dt / 6.0;
    let acc = &ws.acc;
    let phi_sum = &ws.phi_sum;
    let psi_sum = &ws.psi_sum;
    let psi_stage = &ws.psi_stage;
    let (phi_new, psi_new) = (state.phi.values_mut(), state.psi.values_mut());
    let bad: Vec<bool> = phi_new
        .par_chunks_mut(CHUNK)
        .zip(psi_new.par_chunks_mut(CHUNK))
        .enumerate()
        .map(|(c, (fv, pv))| {
            let base = c * CHUNK;
            let mut bad = false;
            for k in 0..fv.len() {
                let i = base + k;
                let f = flush(fv[k] + sixth * (phi_sum[i] + psi_stage[i]));
                let p = flush(pv[k] + sixth * (psi_sum[i] + acc[i]));
                bad |= !(f.is_finite() && p.is_finite());
                fv[k] = f;
                pv[k] = p;
            }
            bad
        })
        .collect();
    state.t = t + dt;
    if bad.into_iter().any(|b| b) {
        return Err(Error::NanDetected { t: state.t });
    }
    Ok(())
}

fn check_cfl(grid: &GridSpec, dt: f64, cfg: &SolverConfig) -> Result<()> {
    let limit = cfg.cfl * grid.spacing();
    if !(dt > 0.0 && dt <= limit * (1.0 + 1e-12)) {
        return Err(Error::CflViolation { dt, limit });
    }
    Ok(())
}

/// One RK4 step of size `dt`; appends the new slice to the history.
pub fn step(state: &mut State, dt: f64, cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
    check_cfl(state.grid(), dt, cfg)?;
    let mut ws = Workspace::new(state.grid());
    rk4_step(state, dt, cfg.q_max, &mut ws)?;
    state.push_history();
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Termination {
    ReachedEnd,
    /// The hyperbolicity guard `Q < q_max` failed at a stage of the step
    /// starting from the returned state.
    Breakdown { t: f64, node: usize, q: f64 },
    /// The solution reached the boundary band; the run is invalid.
    SupportGuard { t: f64, node: usize, value: f64 },
}

/// Nodes within `margin` of the boundary.
fn boundary_band(grid: &GridSpec, margin: f64) -> Vec<usize> {
    let edge = grid.extent() - margin;
    let n = grid.dim();
    (0..grid.len())
        .filter(|&node| {
            let x = grid.node_coords(node);
            x[..n].iter().any(|v| v.abs() >= edge - 1e-12 * grid.extent())
        })
        .collect()
}

fn guard_violation(state: &State, band: &[usize]) -> Option<(usize, f64)> {
    let threshold = SUPPORT_GUARD_RELATIVE * state.amplitude;
    let (phi, psi) = (state.phi.values(), state.psi.values());
    band.iter().find_map(|&node| {
        let v = phi[node].abs().max(psi[node].abs());
        (v > threshold).then_some((node, phi[node]))
    })
}

/// Integrates to `t_end`. The sampler sees the initial state and the state
/// at every multiple of `sample_dt` (and at `t_end`); the step size is the
/// largest `dt ≤ cfl·h` dividing each sampling interval evenly.
pub fn evolve<F>(
    state: &mut State,
    t_end: f64,
    cfg: &SolverConfig,
    sample_dt: Option<f64>,
    mut sampler: F,
) -> Result<Termination>
where
    F: FnMut(&State) -> Result<()>,
{
    cfg.validate()?;
    let grid = *state.grid();
    let t0 = state.t;
    if !(t_end >= t0) {
        return Err(Error::config("time.t_end", format!("{t_end} is before the start time {t0}")));
    }
    let interval = sample_dt.unwrap_or(t_end - t0);
    if !(interval > 0.0 || t_end == t0) {
        return Err(Error::config("diagnostics.sample_dt", "must be > 0"));
    }
    let band = boundary_band(&grid, cfg.margin_for(&grid));
    let max_dt = cfg.cfl * grid.spacing();
    let mut ws = Workspace::new(&grid);

    sampler(state)?;
    if let Some((node, value)) = guard_violation(state, &band) {
        return Ok(Termination::SupportGuard { t: state.t, node, value });
    }
    let segments = if t_end == t0 {
        0
    } else {
        ((t_end - t0) / interval - 1e-9).ceil().max(1.0) as usize
    };
    for k in 0..segments {
        let seg_start = t0 + k as f64 * interval;
        let seg_end = if k + 1 == segments {
            t_end
        } else {
            t0 + (k + 1) as f64 * interval
        };
        let steps = ((seg_end - seg_start) / max_dt - 1e-9).ceil().max(1.0) as usize;
        let dt = (seg_end - seg_start) / steps as f64;
        for j in 0..steps {
            match rk4_step(state, dt, cfg.q_max, &mut ws) {
                Ok(()) => {}
                Err(Error::NonHyperbolic { node, q, t }) => {
                    return Ok(Termination::Breakdown {
                        t: t.unwrap_or(state.t),
                        node,
                        q,
                    });
                }
                Err(e) => return Err(e),
            }
            state.t = if j + 1 == steps {
                seg_end
            } else {
                seg_start + (j + 1) as f64 * dt
            };
            state.push_history();
            if let Some((node, value)) = guard_violation(state, &band) {
                return Ok(Termination::SupportGuard { t: state.t, node, value });
            }
        }
        sampler(state)?;
    }
    Ok(Termination::ReachedEnd)
}
