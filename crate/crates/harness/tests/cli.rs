use std::fs;
use std::process::Command;

fn hetvr() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hetvr"))
}

#[test]
fn preset_dry_run_prints_config() {
    let out = hetvr().args(["preset", "fig1", "--scale", "0.1", "--dry-run"]).output().unwrap();
    assert!(out.status.success());
    let cfg: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(cfg["problem"]["glm"]["m"], 1000);
    assert_eq!(cfg["problem"]["glm"]["n"], 10);
}

#[test]
fn unknown_preset_exits_with_config_code() {
    let out = hetvr().args(["preset", "fig9", "--dry-run"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("fig9"));
}

#[test]
fn malformed_config_reports_location() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.json");
    fs::write(&path, r#"{"name": "x", "problem": {"glm": {"m": 10, "n": 2, "ridge": "big", "loss": "squared"}}}"#).unwrap();
    let out = hetvr().arg("run").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("problem.glm.ridge") && err.contains("line 1"), "{err}");
}

#[test]
fn run_then_plot() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("res");
    let status = hetvr()
        .args(["preset", "fig3", "--scale", "0.5", "--out"])
        .arg(&dir)
        .status()
        .unwrap();
    assert!(status.success());
    let svg = tmp.path().join("again.svg");
    let status = hetvr()
        .arg("plot")
        .arg(dir.join("trace.csv"))
        .arg("--out")
        .arg(&svg)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(fs::read_to_string(svg).unwrap().contains("arcd"));
}

#[test]
fn generate_writes_instance() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = tmp.path().join("spec.json");
    fs::write(&spec, r#"{"smoothness": [10, 50], "strong_convexity": [1, 1], "epsilon": 1e-4}"#).unwrap();
    let out = hetvr().arg("generate").arg(&spec).output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["optimal_value"].as_f64().unwrap() < 0.0);
    assert_eq!(v["min_queries"].as_array().unwrap().len(), 2);
}
