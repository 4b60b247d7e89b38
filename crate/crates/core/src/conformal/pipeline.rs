use serde::{Deserialize, Serialize};

use super::chart::{kappa_coords, HyperboloidParam};
use super::compact::{compactified_solve_1d, CompactConfig};
use super::fixture::CoefficientFixture;
use super::transform::transform_to_compactified;
use crate::error::{Error, Result};
use crate::fields::{interpolate, GridSpec};
use crate::solver::{evolve, initial_state, InitialData, Profile, SolverConfig, Termination, Trajectory};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub epsilon: f64,
    /// Data are posed at `t = a`.
    pub a: f64,
    pub profile: Profile,
    pub width: f64,
    /// Direct-route grid spacing.
    pub h: f64,
    /// Compactified-route grid spacing in `y`.
    pub dy: f64,
    pub cfl: f64,
    pub q_max: f64,
    /// The backward direct run stops here; must lie below `2b`.
    pub t_low: f64,
    pub sample_times: Vec<f64>,
    /// Spacing of the sample abscissae.
    pub sample_dx: f64,
    /// Collar width times `b`.
    pub collar_factor: f64,
    pub s_end: f64,
    /// Extra strip beyond `|y| = s0` in the compactified grid.
    pub strip_margin: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            a: 2.0,
            profile: Profile::Bump,
            width: 1.0,
            h: 0.05,
            dy: 0.01,
            cfl: 0.4,
            q_max: 0.9,
            t_low: 1.4,
            sample_times: (3..=12).map(f64::from).collect(),
            sample_dx: 0.25,
            collar_factor: 0.02,
            s_end: 0.05,
            strip_margin: 0.5,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let param = HyperboloidParam::new(self.a)?;
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::config("pipeline.epsilon", "must be finite and >= 0"));
        }
        if !(self.width > 0.0 && self.width * self.profile.support() <= 1.0) {
            return Err(Error::config("pipeline.width", "data must be supported in |x| <= 1"));
        }
        if !(self.h > 0.0 && self.dy > 0.0) {
            return Err(Error::config("pipeline.h", "grid spacings must be > 0"));
        }
        if !(self.t_low < 2.0 * param.b && self.t_low > 0.0) {
            return Err(Error::config("pipeline.t_low", format!("must lie in (0, {})", 2.0 * param.b)));
        }
        if self.sample_times.is_empty() || self.sample_times.iter().any(|t| !(*t > self.a)) {
            return Err(Error::config("pipeline.sample_times", "need times after a"));
        }
        if !(self.sample_dx > 0.0) {
            return Err(Error::config("pipeline.sample_dx", "must be > 0"));
        }
        Ok(())
    }

    /// The same run with both spacings divided by `2^level`.
    pub fn refined(&self, level: u32) -> Self {
        let f = 2f64.powi(level as i32);
        Self {
            h: self.h / f,
            dy: self.dy / f,
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PipelineReport {
    pub h: f64,
    pub dy: f64,
    pub samples: usize,
    /// Samples inside the region but outside the compactified solution
    /// (collar or `s < s_end`).
    pub skipped: usize,
    /// Samples outside `t - |x| ≥ a - 1`; zero by construction.
    pub outside_region: usize,
    pub max_abs_diff: f64,
    pub direct_sup: f64,
    /// `max |φ_direct - φ_compact| / max |φ_direct|` over the samples.
    pub max_rel_diff: f64,
}

/// Grid on `[-L, L]` with `L` rounded up to a multiple of `h`.
fn grid_for(extent: f64, h: f64) -> Result<GridSpec> {
    let cells = (extent / h - 1e-9).ceil();
    GridSpec::new(1, cells * h, 2 * cells as usize + 1)
}

/// Direct and compactified solutions of the same small-data problem,
/// compared at sample points inside `t - |x| ≥ a - 1`.
pub fn pipeline_compare(cfg: &PipelineConfig) -> Result<PipelineReport> {
    cfg.validate()?;
    let param = HyperboloidParam::new(cfg.a)?;
    let solver = SolverConfig {
        cfl: cfg.cfl,
        q_max: cfg.q_max,
        ..Default::default()
    };
    let data = InitialData::new(cfg.profile.clone(), cfg.epsilon, cfg.width);
    let t_late = cfg.sample_times.iter().fold(cfg.a, |m, t| m.max(*t));

    // backward to the hyperboloid patch
    let back_grid = grid_for(1.0 + (cfg.a - cfg.t_low) + 3.0, cfg.h)?;
    let start = initial_state(&data, back_grid, solver.margin_for(&back_grid))?.at_time(cfg.a);
    let mut reversed = start.time_reversed()?;
    let mut traj = Trajectory::new(back_grid);
    let turn = 2.0 * cfg.a;
    let end = evolve(&mut reversed, turn - cfg.t_low, &solver, Some(cfg.h), |s| {
        traj.push(turn - s.t(), s.phi().clone(), s.psi().scaled(-1.0)?)
    })?;
    expect_end(end)?;
    let dx = traj.spatial_derivative(0)?;

    // compactified route
    let s0 = param.plane_s();
    let strip = grid_for(s0 + cfg.strip_margin, cfg.dy)?;
    let plane = transform_to_compactified(&traj, &dx, &param, strip, 0.0)?;
    let compact_cfg = CompactConfig {
        s_end: cfg.s_end,
        cfl: cfg.cfl,
        collar: cfg.collar_factor / param.b,
    };
    let fixture = CoefficientFixture::builtin(1)?;
    let compact = compactified_solve_1d(&plane, &fixture, &compact_cfg)?;

    // forward direct route
    let fwd_grid = grid_for(t_late - cfg.a + 1.0 + 4.0, cfg.h)?;
    let mut state = initial_state(&data, fwd_grid, solver.margin_for(&fwd_grid))?.at_time(cfg.a);
    let mut times = cfg.sample_times.clone();
    times.sort_by(f64::total_cmp);
    let mut report = PipelineReport {
        h: cfg.h,
        dy: cfg.dy,
        samples: 0,
        skipped: 0,
        outside_region: 0,
        max_abs_diff: 0.0,
        direct_sup: 0.0,
        max_rel_diff: 0.0,
    };
    for t in times {
        expect_end(evolve(&mut state, t, &solver, None, |_| Ok(()))?)?;
        let reach = t - (cfg.a - 1.0);
        let k_max = (reach / cfg.sample_dx + 1e-9).floor() as i64;
        for k in -k_max..=k_max {
            let x = k as f64 * cfg.sample_dx;
            if t - x.abs() < cfg.a - 1.0 {
                report.outside_region += 1;
                continue;
            }
            let sy = kappa_coords(&[t, x]).ok_or_else(|| {
                Error::InternalConsistency(format!("sample ({t}, {x}) outside the cone"))
            })?;
            if !compact.covers(sy[0], sy[1]) {
                report.skipped += 1;
                continue;
            }
            let direct = interpolate(state.phi(), &[x])?;
            let via = compact.sample(sy[0], sy[1])?;
            report.samples += 1;
            report.direct_sup = report.direct_sup.max(direct.abs());
            report.max_abs_diff = report.max_abs_diff.max((direct - via).abs());
        }
    }
    report.max_rel_diff = if report.direct_sup > 0.0 {
        report.max_abs_diff / report.direct_sup
    } else {
        report.max_abs_diff
    };
    Ok(report)
}

fn expect_end(t: Termination) -> Result<()> {
    match t {
        Termination::ReachedEnd => Ok(()),
        other => Err(Error::InternalConsistency(format!("direct run stopped early: {other:?}"))),
    }
}

/// Runs the comparison at `levels` joint refinements (`h`, `dy` halved
/// each time).
pub fn pipeline_refinement(cfg: &PipelineConfig, levels: u32) -> Result<Vec<PipelineReport>> {
    (0..levels).map(|k| pipeline_compare(&cfg.refined(k))).collect()
}
