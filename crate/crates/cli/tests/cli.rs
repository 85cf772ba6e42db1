use std::process::{Command, Output};

use serde_json::Value;

fn geomargin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geomargin"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stderr_error(out: &Output) -> Value {
    let err: Value = serde_json::from_slice(&out.stderr).expect("stderr is JSON");
    err["error"].clone()
}

#[test]
fn pf_prints_an_equilibrium() {
    let v = stdout_json(&geomargin(&["pf", "--case", "case9mod1-static"]));
    assert!(v["residual_inf"].as_f64().unwrap() < 1e-8);
    assert_eq!(v["x_labels"].as_array().unwrap().len(), 3);
    assert_eq!(v["y"].as_array().unwrap().len(), 23);
}

#[test]
fn unknown_case_is_a_structured_error() {
    let out = geomargin(&["pf", "--case", "case7"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_error(&out);
    assert_eq!(err["kind"], "case");
    assert!(err["message"].as_str().unwrap().contains("case7"));
}

#[test]
fn bad_case_file_reports_a_pointer() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let case = r#"{"name": "bad", "base_mva": 100.0, "zip": {"z_fraction": 0.0, "p_fraction": 1.0},
        "buses": [{"id": 1, "kind": "slack", "p_mw": 0.0, "q_mvar": 0.0, "v_setpoint": 1.0},
                  {"id": 2, "kind": "pq", "p_mw": -50.0, "q_mvar": -10.0}],
        "branches": [{"from": 1, "to": 3, "r": 0.01, "x": 0.1, "b": 0.0}],
        "study": {"kind": "static_dispatch", "metric": "adjustable"}}"#;
    std::fs::write(&path, case).unwrap();
    let out = geomargin(&["pf", "--case", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_error(&out);
    assert_eq!(err["pointer"], "/branches/0/to");
}

#[test]
fn usage_errors_exit_with_two() {
    let out = geomargin(&["manifold", "--case", "case9mod2", "--objective", "shortest"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_error(&out)["kind"], "usage");
    let out = geomargin(&["pf", "--case", "case9mod2", "--zip", "40"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn geodesic_checks_the_target_length() {
    let out = geomargin(&["geodesic", "--case", "case9mod2", "--to", "1.0,2.0"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_error(&out)["kind"], "usage");
}

#[test]
fn cpf_emits_a_trace() {
    let out = geomargin(&["cpf", "--case", "case9mod2"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    let width = header.split(',').count();
    let rows: Vec<&str> = lines.collect();
    assert!(rows.len() > 5);
    assert!(rows.iter().all(|r| r.split(',').count() == width));
}

#[test]
fn manifold_writes_reports_paths_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let out = geomargin(&[
        "manifold",
        "--case",
        "case9mod2",
        "--nodes",
        "20",
        "--seeds",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
        "--svg",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let reports: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("reports.json")).unwrap()).unwrap();
    let reports = reports.as_array().unwrap();
    assert!(!reports.is_empty());
    for r in reports {
        assert_eq!(r["method"], "manifold");
        assert_eq!(r["diagnostics"]["intervals"], 20);
    }
    let csv = std::fs::read_to_string(dir.path().join("path_0.csv")).unwrap();
    assert!(csv.starts_with("tau,"));
    assert!(csv.lines().next().unwrap().ends_with(",sigma_min"));
    assert_eq!(csv.lines().count(), 22);
    let svg = std::fs::read_to_string(dir.path().join("paths.svg")).unwrap();
    assert!(svg.contains("<polyline"));
}

#[test]
fn compare_reports_the_gap() {
    let out = geomargin(&["compare", "--case", "case9mod1-static", "--format", "json"]);
    let v = stdout_json(&out);
    let manifold = v["manifold_min"].as_f64().unwrap();
    let associated = v["associated_min"].as_f64().unwrap();
    assert!(manifold <= associated + 1e-9, "{manifold} vs {associated}");
    assert!(v["reports"].as_array().unwrap().iter().any(|r| r["method"] == "associated"));
}

#[test]
fn euclid_is_deterministic() {
    let args = ["euclid", "--case", "case39", "--seeds", "1", "--seed-rng", "11"];
    let first = geomargin(&args);
    let second = geomargin(&args);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
    let reports = stdout_json(&first);
    assert!(reports.as_array().unwrap().len() >= 2);
}
