use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const MODEL: &str = r#"{
    "states": ["a", "b", "c"],
    "rates": [["a", "b", 2.0], ["b", "a", 1.0], ["b", "c", 1.5],
              ["c", "b", 0.5], ["c", "a", 1.0], ["a", "c", 0.7]]
}"#;

const FAMILY: &str = r#"{
    "states": ["a", "b", "c"],
    "rates": [["a", "b", 1.0], ["b", "a", 1.0], ["b", "c", 1.0],
              ["c", "b", 1.0], ["c", "a", 1.0], ["a", "c", 1.0]],
    "k1": [["a", "b", 1.0], ["b", "c", 1.0], ["c", "a", 1.0],
           ["b", "a", -1.0], ["c", "b", -1.0], ["a", "c", -1.0]],
    "f1": {"a": 1.0, "b": -0.5, "c": 0.1},
    "eps_grid": [0.1, 0.01, 0.001]
}"#;

fn minep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_minep"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(out: &Output) -> Value {
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn float(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"))
}

#[test]
fn dv_at_stationary_distribution_is_zero() {
    let dir = TempDir::new().unwrap();
    let model = write(&dir, "m.json", MODEL);
    let rho = json(&minep(&["stationary", "--model", s(&model)]));
    let mu = write(&dir, "mu.json", &rho["rho"].to_string());
    let out = json(&minep(&["dv", "--model", s(&model), "--mu", s(&mu)]));
    assert!(float(&out["I"]).abs() <= 1e-10);
    assert!(float(&out["certificate_residual"]) <= 1e-8);
    assert_eq!(out["interior"], Value::Bool(true));
    assert_eq!(out["g_star"].as_object().unwrap().len(), 3);
}

#[test]
fn dv_on_reduced_support_reports_supremum() {
    let dir = TempDir::new().unwrap();
    let model = write(&dir, "m.json", MODEL);
    let out = json(&minep(&["dv", "--model", s(&model), "--mu", r#"{"a": 0.5, "b": 0.5}"#]));
    assert_eq!(out["interior"], Value::Bool(false));
    assert!(float(&out["I"]) > 0.0);
    assert!(out["g_star"].is_null());
}

#[test]
fn ep_serializes_infinity_as_string() {
    let dir = TempDir::new().unwrap();
    let model = write(&dir, "m.json", MODEL);
    let out = json(&minep(&["ep", "--model", s(&model), "--mu", r#"{"a": 1.0}"#]));
    assert_eq!(out["sigma"], Value::String("inf".into()));
    assert!(out["sigma_S"].is_null());
    let uniform = r#"{"a": 0.25, "b": 0.25, "c": 0.5}"#;
    let out = json(&minep(&["ep", "--model", s(&model), "--mu", uniform]));
    assert!(float(&out["sigma"]) > 0.0);
}

#[test]
fn ep_split_with_energies() {
    let dir = TempDir::new().unwrap();
    let model = write(
        &dir,
        "m.json",
        r#"{"states": ["a", "b"], "rates": [["a", "b", 2.0], ["b", "a", 1.0]],
            "energies": {"a": 0.6931471805599453, "b": 0.0}}"#,
    );
    let out = json(&minep(&["ep", "--model", s(&model), "--mu", r#"{"a": 0.5, "b": 0.5}"#]));
    let total = float(&out["sigma_S"]) + float(&out["sigma_R"]);
    assert!((total - float(&out["sigma"])).abs() <= 1e-12);
}

#[test]
fn scan_csv_golden_header_and_shape() {
    let dir = TempDir::new().unwrap();
    let family = write(&dir, "f.json", FAMILY);
    let out = minep(&["scan", "--family", s(&family)]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.split("\r\n").filter(|l| !l.is_empty()).collect();
    assert_eq!(lines[0], "eps,I,Q,diff,diff_over_eps2,I_over_eps2,Q_over_eps2");
    assert_eq!(lines.len(), 4);
    for line in &lines[1..] {
        let cells: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cells.len(), 7);
        // 17 significant digits reproduce the value.
        assert!((cells[3] - (cells[1] - cells[2])).abs() <= 1e-15 * cells[1].abs().max(1e-300));
    }
    let json_out = json(&minep(&["scan", "--family", s(&family), "--format", "json"]));
    assert_eq!(json_out.as_array().unwrap().len(), 3);
}

#[test]
fn ou_and_circuit() {
    let out = json(&minep(&[
        "ou", "--gamma", "1.0", "--beta", "2.0", "--drive", "0.5", "--parity", "even", "--mean",
        "-0.3", "--var", "0.8",
    ]));
    assert!(float(&out["identity_residual"]).abs() <= 1e-12 * float(&out["sigma"]).max(1.0));
    let out = json(&minep(&[
        "ou", "--gamma", "1.0", "--beta", "2.0", "--drive", "0.5", "--parity", "odd", "--mean",
        "0.1", "--var", "0.8",
    ]));
    assert!(float(&out["identity_residual"]).abs() <= 1e-10);
    let args = ["circuit", "--R", "2.0", "--L", "0.5", "--emf", "1.0", "--beta", "3.0", "--jbar", "1.5"];
    let out = json(&minep(&args));
    // (beta R / 4) (jbar - emf / R)^2
    assert!((float(&out["Ibar"]) - 1.5).abs() <= 1e-12);
    let mut sweep = args.to_vec();
    sweep.extend(["--sweep", "5"]);
    let out = minep(&sweep);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.split("\r\n").filter(|l| !l.is_empty()).collect();
    assert_eq!(lines[0], "jbar,Ibar,Ibar_numerical");
    assert_eq!(lines.len(), 6);
}

#[test]
fn simulate_is_determined_by_seed() {
    let dir = TempDir::new().unwrap();
    let model = write(&dir, "m.json", MODEL);
    let run = |seed: &str| minep(&["simulate", "--model", s(&model), "--T", "50", "--samples", "8", "--seed", seed]);
    let (a, b, c) = (run("3"), run("3"), run("4"));
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    let out = json(&a);
    assert_eq!(out["occupation"].as_array().unwrap().len(), 8);
    let v = write(&dir, "v.json", r#"{"a": 0.05, "b": -0.02}"#);
    let fk = json(&minep(&[
        "simulate", "--model", s(&model), "--T", "50", "--samples", "500", "--seed", "1", "--V", s(&v),
    ]));
    let z = (float(&fk["lambda_hat"]) - float(&fk["perron"])) / float(&fk["stderr"]);
    assert!(z.abs() < 4.0, "{fk}");
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.json");
    let out = minep(&["stationary", "--model", s(&missing)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.json"));

    assert_eq!(minep(&["stationary"]).status.code(), Some(2));
    assert_eq!(minep(&["frobnicate"]).status.code(), Some(2));

    let reducible = write(&dir, "r.json", r#"{"states": ["a", "b"], "rates": [["a", "b", 1.0]]}"#);
    assert_eq!(minep(&["stationary", "--model", s(&reducible)]).status.code(), Some(2));
    let bad_json = write(&dir, "b.json", "{");
    assert_eq!(minep(&["stationary", "--model", s(&bad_json)]).status.code(), Some(2));

    // Potential spread large enough to trip the overflow guard: a numerical failure.
    let model = write(&dir, "m.json", MODEL);
    let v = write(&dir, "v.json", r#"{"a": 100.0, "b": -100.0}"#);
    let out = minep(&["simulate", "--model", s(&model), "--T", "200", "--samples", "50", "--seed", "1", "--V", s(&v)]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
