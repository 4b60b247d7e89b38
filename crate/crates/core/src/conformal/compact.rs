use serde::{Deserialize, Serialize};

use super::fixture::CoefficientFixture;
use super::rhs::compactified_split;
use crate::error::{Error, Result};
use crate::fields::reduce::try_fill_by;
use crate::fields::{GridSpec, ScalarField, D1_CENTERED, D2_CENTERED};
use crate::solver::Trajectory;

/// `φ̃` and `∂_sφ̃` on the plane `s = s0`, sampled on a strip `|y| ≤ Y`.
#[derive(Clone, Debug)]
pub struct CompactData {
    pub s0: f64,
    pub f: ScalarField,
    pub fs: ScalarField,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompactConfig {
    /// Integration stops at this `s` (the run goes from `s0` down to it).
    pub s_end: f64,
    pub cfl: f64,
    /// Width of the excluded band `s - |y| < collar` next to the cone.
    pub collar: f64,
}

impl Default for CompactConfig {
    fn default() -> Self {
        Self {
            s_end: 0.05,
            cfl: 0.4,
            collar: 0.02 / 0.75,
        }
    }
}

impl CompactConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.s_end > 0.0) {
            return Err(Error::config("pipeline.s_end", "must be > 0"));
        }
        if !(self.cfl > 0.0 && self.cfl <= 0.5) {
            return Err(Error::config("pipeline.cfl", "must lie in (0, 0.5]"));
        }
        if !(self.collar > 0.0) {
            return Err(Error::config("pipeline.collar", "must be > 0"));
        }
        Ok(())
    }
}

/// Slices of `(φ̃, ∂_sφ̃)` with `s` as the time variable (decreasing).
#[derive(Clone, Debug)]
pub struct CompactSolution {
    pub trajectory: Trajectory,
    pub collar: f64,
}

impl CompactSolution {
    /// `φ̃(s, y)`, refusing points in the collar or outside the solved range.
    pub fn sample(&self, s: f64, y: f64) -> Result<f64> {
        if s - y.abs() < self.collar {
            return Err(Error::OutOfBounds(format!("(s, y) = ({s}, {y}) lies in the cone collar")));
        }
        Ok(self.trajectory.sample(s, &[y])?.0)
    }

    pub fn covers(&self, s: f64, y: f64) -> bool {
        let Some((lo, hi)) = self.trajectory.time_range() else {
            return false;
        };
        s - y.abs() >= self.collar && s >= lo && s <= hi && y.abs() <= self.trajectory.grid().extent()
    }
}

fn zero_ext(v: &[f64], i: isize) -> f64 {
    if i < 0 || i as usize >= v.len() {
        0.0
    } else {
        v[i as usize]
    }
}

fn d1(v: &[f64], i: usize, inv_h: f64) -> f64 {
    let mut s = 0.0;
    for (k, w) in D1_CENTERED.iter().enumerate() {
        s += w * zero_ext(v, i as isize + k as isize - 2);
    }
    s * inv_h
}

fn d2(v: &[f64], i: usize, inv_h2: f64) -> f64 {
    let mut s = 0.0;
    for (k, w) in D2_CENTERED.iter().enumerate() {
        s += w * zero_ext(v, i as isize + k as isize - 2);
    }
    s * inv_h2
}

/// `∂_s²φ̃` solved from the compactified equation at every node.
fn acceleration(
    grid: &GridSpec,
    s: f64,
    f: &[f64],
    fs: &[f64],
    fixture: &CoefficientFixture,
    out: &mut [f64],
) -> Result<()> {
    let h = grid.spacing();
    let (inv_h, inv_h2) = (1.0 / h, 1.0 / (h * h));
    try_fill_by(out, |i| {
        let y = grid.coordinate(i);
        let fy = d1(f, i, inv_h);
        let fsy = d1(fs, i, inv_h);
        let fyy = d2(f, i, inv_h2);
        let split = compactified_split(&[s, y], f[i], &[fs[i], fy], fixture)?;
        let p = split.factor;
        let k = &split.second;
        // A_bc = m_b δ_bc - P K_bc
        let a00 = 1.0 - p * k[0][0];
        let a01 = -p * k[0][1];
        let a11 = -1.0 - p * k[1][1];
        if !(a00 > 0.1) {
            return Err(Error::NonHyperbolic {
                node: i,
                q: a00,
                t: Some(s),
            });
        }
        let v = (p * split.lower - 2.0 * a01 * fsy - a11 * fyy) / a00;
        if !v.is_finite() {
            return Err(Error::NanDetected { t: s });
        }
        Ok(v)
    })
}

/// Integrates the compactified equation (`n = 1`) backward in `s` from
/// the plane `s0` to `cfg.s_end` with RK4, recording every step.
pub fn compactified_solve_1d(
    data: &CompactData,
    fixture: &CoefficientFixture,
    cfg: &CompactConfig,
) -> Result<CompactSolution> {
    cfg.validate()?;
    let grid = *data.f.grid();
    if grid.dim() != 1 || fixture.n != 1 {
        return Err(Error::InvalidIndex("the compactified solver is one-dimensional".into()));
    }
    data.f.check_same_grid(&data.fs)?;
    if !(cfg.s_end < data.s0) {
        return Err(Error::config("pipeline.s_end", "must be below the plane time"));
    }
    let total = data.s0 - cfg.s_end;
    let steps = (total / (cfg.cfl * grid.spacing()) - 1e-9).ceil().max(1.0) as usize;
    let ds = -total / steps as f64;

    let len = grid.len();
    let mut f = data.f.values().to_vec();
    let mut fs = data.fs.values().to_vec();
    let mut traj = Trajectory::new(grid);
    traj.push(data.s0, data.f.clone(), data.fs.clone())?;

    let mut k_f = vec![vec![0.0; len]; 4];
    let mut k_v = vec![vec![0.0; len]; 4];
    let mut stage_f = vec![0.0; len];
    let mut stage_v = vec![0.0; len];
    for step in 0..steps {
        let s = data.s0 + step as f64 * ds;
        let offsets = [0.0, 0.5, 0.5, 1.0];
        for st in 0..4 {
            if st == 0 {
                stage_f.copy_from_slice(&f);
                stage_v.copy_from_slice(&fs);
            } else {
                let c = offsets[st] * ds;
                for i in 0..len {
                    stage_f[i] = f[i] + c * k_f[st - 1][i];
                    stage_v[i] = fs[i] + c * k_v[st - 1][i];
                }
            }
            k_f[st].copy_from_slice(&stage_v);
            acceleration(&grid, s + offsets[st] * ds, &stage_f, &stage_v, fixture, &mut k_v[st])?;
        }
        for i in 0..len {
            f[i] += ds / 6.0 * (k_f[0][i] + 2.0 * k_f[1][i] + 2.0 * k_f[2][i] + k_f[3][i]);
            fs[i] += ds / 6.0 * (k_v[0][i] + 2.0 * k_v[1][i] + 2.0 * k_v[2][i] + k_v[3][i]);
        }
        let s_next = if step + 1 == steps {
            cfg.s_end
        } else {
            data.s0 + (step + 1) as f64 * ds
        };
        traj.push(
            s_next,
            ScalarField::new(grid, f.clone(), "phi_tilde")?,
            ScalarField::new(grid, fs.clone(), "dphi_tilde_ds")?,
        )?;
    }
    Ok(CompactSolution {
        trajectory: traj,
        collar: cfg.collar,
    })
}
