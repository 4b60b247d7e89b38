use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::conformal::{HyperboloidParam, PipelineConfig};
use crate::error::{Error, Result};
use crate::fields::GridSpec;
use crate::membrane::Formulation;
use crate::solver::{InitialData, Profile, SolverConfig};
use crate::symmetry::DiagnosticsConfig;

/// Version tag written into every artifact header.
pub const ARTIFACT_VERSION: &str = concat!("minkmembrane-", env!("CARGO_PKG_VERSION"));

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub extent: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_end: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
}

fn default_cfl() -> f64 {
    0.4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub profile: Profile,
    pub epsilon: f64,
    #[serde(default = "default_width")]
    pub width: f64,
    #[serde(default = "default_g_profile")]
    pub g_profile: Profile,
}

fn default_width() -> f64 {
    1.0
}

fn default_g_profile() -> Profile {
    Profile::Zero
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub q_max: f64,
    /// Width of the support-guard band; defaults to 5% of the half-width.
    pub support_margin: Option<f64>,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            q_max: 0.9,
            support_margin: None,
        }
    }
}

/// Settings of the direct/compactified comparison. The direct grid spacing
/// is taken from `grid`; the grids themselves are sized by the pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConformalSection {
    pub a: f64,
    pub levels: u32,
    /// `dy = dy_ratio * h` on every level.
    pub dy_ratio: f64,
    pub t_low: f64,
    pub sample_times: Vec<f64>,
    pub sample_dx: f64,
    pub collar_factor: f64,
    pub s_end: f64,
    pub strip_margin: f64,
    /// Required reduction of the difference per refinement level.
    pub min_ratio: f64,
    /// Largest accepted relative difference on the coarsest level.
    pub max_coarse: f64,
}

impl Default for ConformalSection {
    fn default() -> Self {
        let p = PipelineConfig::default();
        Self {
            a: p.a,
            levels: 3,
            dy_ratio: p.dy / p.h,
            t_low: p.t_low,
            sample_times: p.sample_times,
            sample_dx: p.sample_dx,
            collar_factor: p.collar_factor,
            s_end: p.s_end,
            strip_margin: p.strip_margin,
            min_ratio: 3.0,
            max_coarse: 5e-2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub epsilons: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            epsilons: vec![1e-3, 1e-2, 1e-1, 1.0, 3.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    /// Random bundles for the formulation-equivalence check, split over n = 1, 2.
    pub bundles: usize,
    /// Random bundle pairs for the Γ-Q commutation check.
    pub commutation_bundles: usize,
    /// Random points per dimension for the conformal identities.
    pub conformal_points: usize,
    /// Directory with replacement fixture files.
    pub fixture_dir: Option<PathBuf>,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            bundles: 100,
            commutation_bundles: 50,
            conformal_points: 50,
            fixture_dir: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dimension: usize,
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub initial_data: DataConfig,
    #[serde(default)]
    pub formulation: Formulation,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub conformal: ConformalSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

/// Parses and validates a JSON run configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::ConfigParse {
        line: e.line(),
        column: e.column(),
        msg: e.to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dimension) {
            return Err(Error::config("dimension", format!("{} not in {{1, 2, 3}}", self.dimension)));
        }
        if !(self.grid.extent.is_finite() && self.grid.extent > 0.0) {
            return Err(Error::config("grid.extent", "must be > 0"));
        }
        if self.grid.points < 5 || self.grid.points.is_multiple_of(2) {
            return Err(Error::config("grid.points", "must be odd and at least 5"));
        }
        self.grid_spec()
            .map_err(|e| Error::config("grid", e.to_string()))?;
        if !(self.time.t_end.is_finite() && self.time.t_end >= 0.0) {
            return Err(Error::config("time.t_end", "must be finite and >= 0"));
        }
        self.solver_config().validate()?;
        self.initial_data().validate()?;
        self.diagnostics.validate()?;
        if !(self.diagnostics.sample_dt > 0.0) {
            return Err(Error::config("diagnostics.sample_dt", "must be > 0"));
        }
        HyperboloidParam::new(self.conformal.a).map_err(|_| Error::config("conformal.a", "must be > 1"))?;
        if self.conformal.levels == 0 {
            return Err(Error::config("conformal.levels", "must be >= 1"));
        }
        if !(self.conformal.dy_ratio > 0.0) {
            return Err(Error::config("conformal.dy_ratio", "must be > 0"));
        }
        let eps = &self.sweep.epsilons;
        if eps.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(Error::config("sweep.epsilons", "entries must be finite and >= 0"));
        }
        if eps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("sweep.epsilons", "must be strictly increasing"));
        }
        Ok(())
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.dimension, self.grid.extent, self.grid.points)
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            cfl: self.time.cfl,
            q_max: self.solver.q_max,
            support_margin: self.solver.support_margin,
            formulation: self.formulation,
        }
    }

    pub fn initial_data(&self) -> InitialData {
        InitialData {
            profile: self.initial_data.profile.clone(),
            epsilon: self.initial_data.epsilon,
            width: self.initial_data.width,
            g_profile: self.initial_data.g_profile.clone(),
        }
    }

    /// Pipeline settings: `h` from the grid spacing, data from `initial_data`.
    pub fn pipeline_config(&self) -> Result<PipelineConfig> {
        let h = self.grid_spec()?.spacing();
        let c = &self.conformal;
        Ok(PipelineConfig {
            epsilon: self.initial_data.epsilon,
            a: c.a,
            profile: self.initial_data.profile.clone(),
            width: self.initial_data.width,
            h,
            dy: c.dy_ratio * h,
            cfl: self.time.cfl,
            q_max: self.solver.q_max,
            t_low: c.t_low,
            sample_times: c.sample_times.clone(),
            sample_dx: c.sample_dx,
            collar_factor: c.collar_factor,
            s_end: c.s_end,
            strip_margin: c.strip_margin,
        })
    }

    /// SHA-256 of the canonical JSON form (defaults filled in).
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// First-line comment for every CSV artifact.
    pub fn artifact_comment(&self) -> String {
        format!("config_sha256={} version={}", self.hash(), ARTIFACT_VERSION)
    }
}
