use pyo3::prelude::*;
use pyo3::types::PyDict;

const SMALL_RUN: &str = r#"{
    "dimension": 1,
    "grid": {"extent": 20, "points": 401},
    "time": {"t_end": 2},
    "initial_data": {"profile": "gaussian", "epsilon": 0.001},
    "diagnostics": {"gamma_order": 1, "sample_dt": 0.5}
}"#;

fn with_module<F: for<'py> FnOnce(Python<'py>, &Bound<'py, PyModule>)>(f: F) {
    Python::attach(|py| {
        let m = PyModule::new(py, "minkmembrane").unwrap();
        minkmembrane_py::register(&m).unwrap();
        f(py, &m);
    });
}

fn run<'py>(py: Python<'py>, m: &Bound<'py, PyModule>, code: &str) -> Bound<'py, PyDict> {
    let locals = PyDict::new(py);
    locals.set_item("mm", m).unwrap();
    locals.set_item("SMALL_RUN", SMALL_RUN).unwrap();
    let code = std::ffi::CString::new(code).unwrap();
    py.run(&code, None, Some(&locals)).unwrap();
    locals
}

#[test]
fn config_round_trip_and_rejection() {
    with_module(|py, m| {
        let out = run(
            py,
            m,
            r#"
import json
cfg = mm.RunConfig.from_json(SMALL_RUN)
filled = json.loads(cfg.to_json())
cfl = filled["time"]["cfl"]
try:
    mm.RunConfig.from_json(SMALL_RUN.replace('"dimension": 1', '"dimension": 4'))
    rejected = False
except ValueError:
    rejected = True
"#,
        );
        let cfl: f64 = out.get_item("cfl").unwrap().unwrap().extract().unwrap();
        assert_eq!(cfl, 0.4);
        assert!(out.get_item("rejected").unwrap().unwrap().extract::<bool>().unwrap());
    });
}

#[test]
fn simulate_returns_records_and_csv() {
    with_module(|py, m| {
        let out = run(
            py,
            m,
            r#"
cfg = mm.RunConfig.from_json(SMALL_RUN)
sim = mm.simulate(cfg)
n = len(sim.records)
code = sim.exit_code
first = sim.norm_csv().splitlines()[0]
"#,
        );
        let n: usize = out.get_item("n").unwrap().unwrap().extract().unwrap();
        assert_eq!(n, 5);
        let code: i32 = out.get_item("code").unwrap().unwrap().extract().unwrap();
        assert_eq!(code, 0);
        let first: String = out.get_item("first").unwrap().unwrap().extract().unwrap();
        assert!(first.starts_with("# config_sha256="));
    });
}

#[test]
fn kappa_and_fit_helpers() {
    with_module(|py, m| {
        let out = run(
            py,
            m,
            r#"
x = mm.kappa([2.0, 1.0])
ts = [float(t) for t in range(10, 30)]
p = mm.fit_decay(ts, [(1 + t) ** -1.5 for t in ts], 10.0)["exponent"]
try:
    mm.kappa([1.0, 2.0])
    outside = False
except ValueError:
    outside = True
"#,
        );
        let x: Vec<f64> = out.get_item("x").unwrap().unwrap().extract().unwrap();
        assert!((x[0] - 2.0 / 3.0).abs() < 1e-15);
        let p: f64 = out.get_item("p").unwrap().unwrap().extract().unwrap();
        assert!((p + 1.5).abs() < 1e-12);
        assert!(out.get_item("outside").unwrap().unwrap().extract::<bool>().unwrap());
    });
}
