use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("axis {axis} out of range for dimension {dim}")]
    AxisOutOfRange { axis: usize, dim: usize },

    #[error("field '{label}' has a non-finite value at node {index}")]
    CorruptField { label: String, index: usize },

    #[error("field '{label}' has {got} values, grid needs {expected}")]
    LengthMismatch {
        label: String,
        got: usize,
        expected: usize,
    },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid index: {0}")]
    InvalidIndex(String),

    #[error("second derivatives are required but missing")]
    MissingSecondDerivatives,

    #[error("equation is not hyperbolic at node {node}: Q = {q}{}", time_suffix(*.t))]
    NonHyperbolic { node: usize, q: f64, t: Option<f64> },

    #[error("non-finite value produced at t = {t}")]
    NanDetected { t: f64 },

    #[error("initial data support does not fit inside the grid: {0}")]
    SupportExceedsGrid(String),

    #[error("time step {dt} exceeds cfl * h = {limit}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("history holds {have} slices, {need} needed")]
    InsufficientHistory { need: usize, have: usize },

    #[error("vector-field product depth {0} exceeds the limit of 3")]
    GammaDepth(usize),

    #[error("need at least {need} samples in the fit window, got {got}")]
    TooFewSamples { need: usize, got: usize },

    #[error("non-positive value {value} at t = {t} cannot be log-fitted")]
    NonPositiveSample { t: f64, value: f64 },

    #[error("linear system is singular: {0}")]
    SingularSystem(String),

    #[error("point is on or outside the forward light cone (rho = {rho})")]
    OnOrOutsideCone { rho: f64 },

    #[error("point too close to the light cone (rho = {rho} < {min})")]
    TooCloseToCone { rho: f64, min: f64 },

    #[error("compactified denominator {value} is below the threshold {threshold}")]
    DenominatorDegenerate { value: f64, threshold: f64 },

    #[error("missing fixture: {0}")]
    MissingFixture(String),

    #[error("fixture parse error at line {line}: {msg}")]
    FixtureParse { line: usize, msg: String },

    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),

    #[error("resampling point {0} lies outside the data")]
    OutOfBounds(String),

    #[error("trajectory does not cover the hyperboloid patch: {0}")]
    CoverageGap(String),

    #[error("config parse error at line {line}, column {column}: {msg}")]
    ConfigParse {
        line: usize,
        column: usize,
        msg: String,
    },

    #[error("invalid config value at '{path}': {msg}")]
    InvalidConfig { path: String, msg: String },

    #[error("malformed CSV at line {line}: {msg}")]
    MalformedCsv { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn time_suffix(t: Option<f64>) -> String {
    match t {
        Some(t) => format!(" at t = {t}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn config(path: &str, msg: impl Into<String>) -> Self {
        Error::InvalidConfig {
            path: path.to_string(),
            msg: msg.into(),
        }
    }

    /// Attach a time stamp to a `NonHyperbolic` error raised by a pointwise kernel.
    pub fn at_time(self, time: f64) -> Self {
        match self {
            Error::NonHyperbolic { node, q, .. } => Error::NonHyperbolic {
                node,
                q,
                t: Some(time),
            },
            other => other,
        }
    }
}
