use super::{Slice, State};
use crate::error::{Error, Result};
use crate::fields::{derivative, interpolate, lagrange_weights, GridSpec, ScalarField};

/// Time-ordered slices of a solution on one grid.
#[derive(Clone, Debug)]
pub struct Trajectory {
    grid: GridSpec,
    slices: Vec<Slice>,
}

impl Trajectory {
    pub fn new(grid: GridSpec) -> Self {
        Self {
            grid,
            slices: Vec::new(),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn slices(&self) -> &[Slice] {
        &self.slices
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    /// Appends a slice. Times may run in either direction but must be
    /// strictly monotone.
    pub fn push(&mut self, t: f64, phi: ScalarField, psi: ScalarField) -> Result<()> {
        if *phi.grid() != self.grid || *psi.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        if self.slices.len() >= 2 {
            let dir = self.slices[1].t - self.slices[0].t;
            let step = t - self.slices[self.slices.len() - 1].t;
            if dir * step <= 0.0 {
                return Err(Error::InvalidIndex("trajectory times must be strictly monotone".into()));
            }
        } else if let Some(last) = self.slices.last() {
            if last.t == t {
                return Err(Error::InvalidIndex("duplicate trajectory time".into()));
            }
        }
        self.slices.push(Slice { t, phi, psi });
        Ok(())
    }

    pub fn push_state(&mut self, state: &State) -> Result<()> {
        self.push(state.t(), state.phi().clone(), state.psi().clone())
    }

    pub fn time_range(&self) -> Option<(f64, f64)> {
        let first = self.slices.first()?.t;
        let last = self.slices.last()?.t;
        Some((first.min(last), first.max(last)))
    }

    /// The trajectory of `∂φ/∂x_axis` (with `ψ` replaced by `∂ψ/∂x_axis`).
    pub fn spatial_derivative(&self, axis: usize) -> Result<Trajectory> {
        let mut out = Trajectory::new(self.grid);
        for s in &self.slices {
            out.slices.push(Slice {
                t: s.t,
                phi: derivative(&s.phi, axis, 1)?,
                psi: derivative(&s.psi, axis, 1)?,
            });
        }
        Ok(out)
    }

    /// Cubic Lagrange interpolation in time over the four nearest slices,
    /// tensor-cubic in space. Returns `(φ, ψ)`.
    pub fn sample(&self, t: f64, x: &[f64]) -> Result<(f64, f64)> {
        let (lo, hi) = self
            .time_range()
            .ok_or_else(|| Error::OutOfBounds("empty trajectory".into()))?;
        let span = (hi - lo).max(1.0);
        if t < lo - 1e-12 * span || t > hi + 1e-12 * span {
            return Err(Error::OutOfBounds(format!("t = {t} outside [{lo}, {hi}]")));
        }
        if let Some(s) = self.slices.iter().find(|s| (s.t - t).abs() <= 1e-13 * span) {
            return Ok((interpolate(&s.phi, x)?, interpolate(&s.psi, x)?));
        }
        if self.slices.len() < 4 {
            return Err(Error::OutOfBounds(format!(
                "time interpolation needs 4 slices, trajectory has {}",
                self.slices.len()
            )));
        }
        let ascending = self.slices[1].t > self.slices[0].t;
        let pos = if ascending {
            self.slices.partition_point(|s| s.t <= t)
        } else {
            self.slices.partition_point(|s| s.t >= t)
        };
        let start = pos.saturating_sub(2).min(self.slices.len() - 4);
        let window = &self.slices[start..start + 4];
        let times: Vec<f64> = window.iter().map(|s| s.t).collect();
        let w = lagrange_weights(t, &times);
        let mut phi = 0.0;
        let mut psi = 0.0;
        for (s, wk) in window.iter().zip(&w) {
            phi += wk * interpolate(&s.phi, x)?;
            psi += wk * interpolate(&s.psi, x)?;
        }
        Ok((phi, psi))
    }
}

/// `φ_a(t, x) = φ(a t, a x) / a` sampled on `target`: each slice at time
/// `t` becomes a slice at `t / a`. `ψ_a(t, x) = ψ(a t, a x)`.
pub fn scale_solution(traj: &Trajectory, a: f64, target: GridSpec) -> Result<Trajectory> {
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::InvalidIndex(format!("scaling factor {a} must be > 0")));
    }
    if target.dim() != traj.grid().dim() {
        return Err(Error::GridMismatch);
    }
    let n = target.dim();
    let mut out = Trajectory::new(target);
    for s in traj.slices() {
        let resample = |f: &ScalarField, factor: f64| -> Result<ScalarField> {
            let mut values = vec![0.0; target.len()];
            for (node, v) in values.iter_mut().enumerate() {
                let x = target.node_coords(node);
                let scaled: Vec<f64> = x[..n].iter().map(|xi| a * xi).collect();
                *v = factor * interpolate(f, &scaled)?;
            }
            ScalarField::new(target, values, f.label())
        };
        out.slices.push(Slice {
            t: s.t / a,
            phi: resample(&s.phi, 1.0 / a)?,
            psi: resample(&s.psi, 1.0)?,
        });
    }
    Ok(out)
}
