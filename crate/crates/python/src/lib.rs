//! Python module `minkmembrane`: run configurations, simulations, the
//! verification suites and a few geometric helpers.

use minkmembrane::conformal::kappa_coords;
use minkmembrane::experiment::checks::{conformal_suite, verify_suite, CheckReport};
use minkmembrane::experiment::{self, parse_config, Simulation, Status, ARTIFACT_VERSION};
use minkmembrane::solver::Termination;
use minkmembrane::symmetry::{fit_decay_exponent, write_norm_csv};
use minkmembrane::Error;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

pyo3::create_exception!(minkmembrane, MembraneError, PyException);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::ConfigParse { .. } | Error::InvalidConfig { .. } => PyValueError::new_err(e.to_string()),
        other => MembraneError::new_err(other.to_string()),
    }
}

/// Any serializable value as plain Python objects (via JSON).
fn plain<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| MembraneError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// A validated run configuration.
#[pyclass(name = "RunConfig", module = "minkmembrane", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyRunConfig {
    inner: experiment::RunConfig,
}

#[pymethods]
impl PyRunConfig {
    /// Parses a JSON configuration; raises `ValueError` on bad input.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: parse_config(text).map_err(to_py)?,
        })
    }

    /// The configuration with defaults filled in, as JSON.
    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner).map_err(|e| MembraneError::new_err(e.to_string()))
    }

    fn hash(&self) -> String {
        self.inner.hash()
    }

    /// A copy with a different data amplitude.
    fn with_epsilon(&self, epsilon: f64) -> PyResult<Self> {
        let mut inner = self.inner.clone();
        inner.initial_data.epsilon = epsilon;
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.dimension
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.initial_data.epsilon
    }

    #[getter]
    fn t_end(&self) -> f64 {
        self.inner.time.t_end
    }

    fn __repr__(&self) -> String {
        format!(
            "RunConfig(dimension={}, epsilon={}, t_end={})",
            self.inner.dimension, self.inner.initial_data.epsilon, self.inner.time.t_end
        )
    }
}

/// Result of `simulate`.
#[pyclass(name = "Simulation", module = "minkmembrane", frozen)]
struct PySimulation {
    sim: Simulation,
    cfg: experiment::RunConfig,
}

#[pymethods]
impl PySimulation {
    /// `"reached_end"`, `"breakdown"` or `"support_guard"`.
    #[getter]
    fn termination(&self) -> &'static str {
        match self.sim.termination {
            Termination::ReachedEnd => "reached_end",
            Termination::Breakdown { .. } => "breakdown",
            Termination::SupportGuard { .. } => "support_guard",
        }
    }

    /// The CLI exit code this run maps to.
    #[getter]
    fn exit_code(&self) -> i32 {
        self.sim.status().code()
    }

    /// Norm samples as a list of dicts keyed like the CSV header.
    #[getter]
    fn records(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        plain(py, &self.sim.records)
    }

    /// Breakdown report as a dict, or `None`.
    #[getter]
    fn breakdown(&self, py: Python<'_>) -> PyResult<Option<Py<PyAny>>> {
        self.sim.breakdown_report(&self.cfg).map(|r| plain(py, &r)).transpose()
    }

    /// Final `φ` values in node order.
    fn final_phi(&self) -> Vec<f64> {
        self.sim.final_state.phi().values().to_vec()
    }

    #[getter]
    fn final_time(&self) -> f64 {
        self.sim.final_state.t()
    }

    /// The norm CSV exactly as `simulate` writes it.
    fn norm_csv(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        write_norm_csv(&mut buf, &self.sim.records, Some(&self.cfg.artifact_comment())).map_err(to_py)?;
        String::from_utf8(buf).map_err(|e| MembraneError::new_err(e.to_string()))
    }
}

/// Evolves the configured data; the GIL is released while it runs.
#[pyfunction]
fn simulate(py: Python<'_>, config: &PyRunConfig) -> PyResult<PySimulation> {
    let cfg = config.inner.clone();
    let sim = py.detach(|| experiment::run_simulation(&cfg)).map_err(to_py)?;
    Ok(PySimulation { sim, cfg })
}

/// Verification report with per-identity summaries.
#[pyclass(name = "CheckReport", module = "minkmembrane", frozen)]
struct PyCheckReport {
    inner: CheckReport,
}

#[pymethods]
impl PyCheckReport {
    #[getter]
    fn passed(&self) -> bool {
        self.inner.passed()
    }

    #[getter]
    fn summaries(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        plain(py, &self.inner.summaries)
    }

    #[getter]
    fn rows(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        plain(py, &self.inner.rows)
    }

    /// Worst defect of one identity, or `None` if it was not checked.
    fn worst(&self, identity: &str) -> Option<f64> {
        self.inner.summary(identity).map(|s| s.worst)
    }
}

/// Formulation equivalence, box commutators and Γ-Q commutation.
#[pyfunction]
fn verify(py: Python<'_>, config: &PyRunConfig) -> PyResult<PyCheckReport> {
    let cfg = config.inner.clone();
    let v = cfg.verify.clone();
    let inner = py
        .detach(|| verify_suite(v.bundles, v.commutation_bundles, cfg.seed, v.fixture_dir.as_deref()))
        .map_err(to_py)?;
    Ok(PyCheckReport { inner })
}

/// The conformal identity suite with its order check.
#[pyfunction]
fn verify_conformal(py: Python<'_>, config: &PyRunConfig) -> PyResult<PyCheckReport> {
    let cfg = config.inner.clone();
    let v = cfg.verify.clone();
    let inner = py
        .detach(|| conformal_suite(v.conformal_points, cfg.seed, v.fixture_dir.as_deref()))
        .map_err(to_py)?;
    Ok(PyCheckReport { inner })
}

/// Outcome per entry of `sweep.epsilons`, as a dict.
#[pyfunction]
fn sweep_epsilon(py: Python<'_>, config: &PyRunConfig) -> PyResult<Py<PyAny>> {
    let cfg = config.inner.clone();
    let result = py.detach(|| experiment::run_sweep(&cfg)).map_err(to_py)?;
    plain(py, &result)
}

/// Direct against compactified solutions over the configured refinement
/// levels, as a dict.
#[pyfunction]
fn compactified_compare(py: Python<'_>, config: &PyRunConfig) -> PyResult<Py<PyAny>> {
    let cfg = config.inner.clone();
    let table = py.detach(|| experiment::run_comparison(&cfg)).map_err(to_py)?;
    plain(py, &table)
}

/// Fits `v ≈ C (1+t)^p` over `t ≥ t_start`; returns a dict with
/// `exponent`, `constant`, `residual` and `samples`.
#[pyfunction]
fn fit_decay(py: Python<'_>, times: Vec<f64>, values: Vec<f64>, t_start: f64) -> PyResult<Py<PyAny>> {
    if times.len() != values.len() {
        return Err(PyValueError::new_err("times and values differ in length"));
    }
    let series: Vec<(f64, f64)> = times.into_iter().zip(values).collect();
    let fit = fit_decay_exponent(&series, t_start).map_err(to_py)?;
    plain(py, &fit)
}

/// The inversion `p / ρ(p)`; raises `ValueError` outside the open cone.
#[pyfunction]
fn kappa(coords: Vec<f64>) -> PyResult<Vec<f64>> {
    kappa_coords(&coords).ok_or_else(|| PyValueError::new_err("point is on or outside the light cone"))
}

/// Exit code a CLI command maps to for `"success"`, `"failure"` or
/// `"breakdown"`.
#[pyfunction]
fn exit_code(status: &str) -> PyResult<i32> {
    let s = match status {
        "success" => Status::Success,
        "failure" => Status::Failure,
        "breakdown" => Status::Breakdown,
        other => return Err(PyValueError::new_err(format!("unknown status '{other}'"))),
    };
    Ok(s.code())
}

#[pymodule]
#[pyo3(name = "minkmembrane")]
fn minkmembrane_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    register(m)
}

/// Adds the module contents to `m`; also used to embed the module in tests.
pub fn register(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("ARTIFACT_VERSION", ARTIFACT_VERSION)?;
    m.add("MembraneError", m.py().get_type::<MembraneError>())?;
    m.add_class::<PyRunConfig>()?;
    m.add_class::<PySimulation>()?;
    m.add_class::<PyCheckReport>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(verify_conformal, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_epsilon, m)?)?;
    m.add_function(wrap_pyfunction!(compactified_compare, m)?)?;
    m.add_function(wrap_pyfunction!(fit_decay, m)?)?;
    m.add_function(wrap_pyfunction!(kappa, m)?)?;
    m.add_function(wrap_pyfunction!(exit_code, m)?)?;
    Ok(())
}
