use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn helm(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_helm-sketch"))
        .args(args)
        .arg("--root")
        .arg(root)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn verify_passes_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = helm(dir.path(), &["verify", "--fixed-clock"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["pass"], true);
    assert!(dir.path().join("out/verify.json").exists());
}

#[test]
fn straight_route_cvm_has_near_zero_msep() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in ["synth", "ingest"] {
        let out = helm(dir.path(), &[cmd, "--fixture", "straight"]);
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = helm(dir.path(), &["evaluate", "--fixture", "straight", "--model", "cvm"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = stdout_json(&out);
    let row = &rows["summary"][0];
    assert_eq!(row["variant"], "cvm");
    assert!(row["n_samples"].as_u64().unwrap() > 0);
    assert!(row["msep"].as_f64().unwrap() < 1e-12, "msep {}", row["msep"]);
    let csv = std::fs::read_to_string(dir.path().join("out/eval.csv")).unwrap();
    assert!(csv.starts_with("# config_hash="));
}

#[test]
fn missing_input_is_machine_readable() {
    let dir = tempfile::tempdir().unwrap();
    let out = helm(dir.path(), &["ingest"]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).expect("stderr is JSON");
    assert_eq!(err["error"]["kind"], "missing_input");
    assert_eq!(err["error"]["command"], "ingest");
}

#[test]
fn config_file_overrides_preset() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"fleet": {"n_vessels": 3}, "channels": 5}"#).unwrap();
    let out = helm(dir.path(), &["synth", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "config");

    std::fs::write(&cfg, r#"{"fleet": {"n_vessels": 3}}"#).unwrap();
    let out = helm(dir.path(), &["synth", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout_json(&out)["summary"]["vessels"], 3);
}

#[test]
fn bad_flag_value_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = helm(dir.path(), &["evaluate", "--channels", "5"]);
    assert!(!out.status.success());
}
