use std::path::Path;
use std::process::{Command, Output};

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("run.json");
    std::fs::write(&path, body).unwrap();
    path
}

fn cli(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_minkmembrane"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

#[test]
fn zero_data_stays_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{ "dimension": 1, "grid": { "extent": 10, "points": 101 }, "time": { "t_end": 2 },
             "initial_data": { "profile": "gaussian", "epsilon": 0 } }"#,
    );
    let out = dir.path().join("zero.csv");
    let run = cli(&["simulate"], &cfg, &out);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config_sha256="));
    assert!(lines.next().unwrap().starts_with("t,"));
    let mut rows = 0;
    for line in lines {
        rows += 1;
        let values: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert!(values[1..].iter().all(|&v| v == 0.0), "{line}");
    }
    assert!(rows >= 2);
}

#[test]
fn breakdown_exits_two_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{ "dimension": 1, "grid": { "extent": 10, "points": 401 }, "time": { "t_end": 5 },
             "initial_data": { "profile": "gaussian", "epsilon": 3, "width": 0.5 } }"#,
    );
    let out = dir.path().join("steep.csv");
    let run = cli(&["simulate"], &cfg, &out);
    assert_eq!(run.status.code(), Some(2));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.with_extension("breakdown.json")).unwrap()).unwrap();
    assert!(report["q"].as_f64().unwrap() >= 0.9);
    assert_eq!(report["epsilon"].as_f64(), Some(3.0));
}

#[test]
fn corrupted_fixture_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let good = std::fs::read_to_string(fixtures.join("gamma_q_commutation_n1.txt")).unwrap();
    let bad = good.replace("box S : -2", "box S : -1");
    assert_ne!(good, bad);
    std::fs::write(dir.path().join("gamma_q_commutation_n1.txt"), bad).unwrap();
    let body = format!(
        r#"{{ "dimension": 1, "grid": {{ "extent": 10, "points": 101 }}, "time": {{ "t_end": 1 }},
              "initial_data": {{ "profile": "gaussian", "epsilon": 0.001 }},
              "verify": {{ "bundles": 4, "commutation_bundles": 2, "fixture_dir": {:?} }} }}"#,
        dir.path().display().to_string()
    );
    let cfg = write_config(dir.path(), &body);
    let out = dir.path().join("verify.csv");
    let run = cli(&["verify"], &cfg, &out);
    assert_eq!(run.status.code(), Some(1));
    let report = std::fs::read_to_string(&out).unwrap();
    let summary = report
        .lines()
        .find(|l| l.starts_with("# summary identity=box_commutator "))
        .unwrap();
    assert!(summary.contains("status=FAIL"), "{summary}");
}

#[test]
fn rejects_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{ "dimension": 4 }"#);
    let run = cli(&["simulate"], &cfg, &dir.path().join("x.csv"));
    assert_eq!(run.status.code(), Some(1));
    assert!(!run.stderr.is_empty());
}
