use minkmembrane::experiment::{parse_config, ARTIFACT_VERSION};
use minkmembrane::Error;

const MINIMAL: &str = r#"{
  "dimension": 1,
  "grid": { "extent": 10, "points": 101 },
  "time": { "t_end": 1 },
  "initial_data": { "profile": "gaussian", "epsilon": 0.001 }
}"#;

fn with(field: &str, value: &str) -> String {
    MINIMAL.replacen(field, value, 1)
}

#[test]
fn minimal_config_fills_defaults() {
    let cfg = parse_config(MINIMAL).unwrap();
    assert_eq!(cfg.time.cfl, 0.4);
    assert_eq!(cfg.initial_data.width, 1.0);
    assert_eq!(cfg.solver.q_max, 0.9);
    assert!(cfg.output.is_none());
}

#[test]
fn rejects_dimension_four() {
    let err = parse_config(&with(r#""dimension": 1"#, r#""dimension": 4"#)).unwrap_err();
    assert!(matches!(err, Error::InvalidConfig { ref path, .. } if path == "dimension"), "{err}");
}

#[test]
fn rejects_cfl_above_one() {
    let err = parse_config(&with(r#""t_end": 1"#, r#""t_end": 1, "cfl": 1.5"#)).unwrap_err();
    assert!(matches!(err, Error::InvalidConfig { .. }), "{err}");
}

#[test]
fn rejects_even_point_count() {
    assert!(parse_config(&with("101", "100")).is_err());
}

#[test]
fn rejects_unknown_fields_with_position() {
    let err = parse_config(&with(r#""t_end": 1"#, r#""t_end": 1, "dt": 0.1"#)).unwrap_err();
    assert!(matches!(err, Error::ConfigParse { line: 4, .. }), "{err}");
}

#[test]
fn hash_is_stable_and_sensitive() {
    let a = parse_config(MINIMAL).unwrap();
    let b = parse_config(&MINIMAL.replace('\n', " ")).unwrap();
    assert_eq!(a.hash(), b.hash());
    let c = parse_config(&with("0.001", "0.002")).unwrap();
    assert_ne!(a.hash(), c.hash());
    assert_eq!(a.hash().len(), 64);
    assert!(a.artifact_comment().ends_with(ARTIFACT_VERSION));
}
