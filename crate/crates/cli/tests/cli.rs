use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn mhl(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mhl")).args(args).arg("--out").arg(dir).env_remove("MHL_JOBS").output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn summary(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{name}.json"))).unwrap()).unwrap()
}

#[test]
fn identities_on_coin_grid_pass() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"filtration": {"base_atoms": [0, 1], "base_weights": [0.5, 0.5], "N": 2, "M": 2}}"#,
    );
    let out = mhl(dir.path(), &["identities", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(dir.path(), "identities");
    assert_eq!(s["pass"], true);
    assert!(s["summary"]["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));
}

#[test]
fn decompose_zero_field_has_zero_terms() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"field": {"zero": true}}"#);
    let out = mhl(dir.path(), &["decompose", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("decompose.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert!(lines.next().is_none());
    for col in ["lhs", "t_A", "t_B", "t_C", "t_D"] {
        let k = header.iter().position(|h| *h == col).unwrap();
        assert_eq!(row[k].parse::<f64>().unwrap(), 0.0, "{col}");
    }
}

#[test]
fn decompose_accepts_explicit_values() {
    let dir = tempfile::tempdir().unwrap();
    // The constant martingale F = 1 on the 16-atom space of the 1x1 coin grid.
    let ones = vec!["1"; 16].join(",");
    let zeros = vec!["0"; 16].join(",");
    let cfg = write_config(
        dir.path(),
        &format!(r#"{{"field": {{"values": [[[{ones}], [{zeros}]], [[{zeros}], [{zeros}]]]}}}}"#),
    );
    let out = mhl(dir.path(), &["decompose", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(dir.path(), "decompose");
    assert_eq!(s["summary"]["fields"], 1);
    assert!((s["summary"]["c_hat"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn constants_are_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = mhl(a.path(), &["constants", "--seed", "7"]);
    let rb = mhl(b.path(), &["constants", "--seed", "7", "--jobs", "1"]);
    assert_eq!(ra.status.code(), Some(0), "{}", String::from_utf8_lossy(&ra.stderr));
    assert_eq!(rb.status.code(), Some(0));
    for f in ["constants.csv", "constants.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let csv = std::fs::read_to_string(a.path().join("constants.csv")).unwrap();
    assert!(csv.starts_with("quantity,value,instance,seed\n"));
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",7")));
}

#[test]
fn invalid_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"trials": "many"}"#);
    let out = mhl(dir.path(), &["identities", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
    assert!(!dir.path().join("identities.json").exists());
}

#[test]
fn randomized_command_without_seed_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = mhl(dir.path(), &["probe"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn non_adapted_field_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    // An atom indicator at (0, 0), where only constants are measurable.
    let spike = std::iter::once("1").chain(std::iter::repeat_n("0", 15)).collect::<Vec<_>>().join(",");
    let zeros = vec!["0"; 16].join(",");
    let cfg = write_config(
        dir.path(),
        &format!(r#"{{"field": {{"values": [[[{spike}], [{zeros}]], [[{zeros}], [{zeros}]]]}}}}"#),
    );
    let out = mhl(dir.path(), &["decompose", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("measurable"));
}

#[test]
fn gradcheck_and_probe_emit_flagged_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"trials": 2, "p_values": [2.0]}"#);
    let out = mhl(dir.path(), &["probe", "--config", &cfg, "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("probe.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",ok")));
    let out = mhl(dir.path(), &["gradcheck", "--config", &cfg, "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(summary(dir.path(), "gradcheck")["config"]["seed"], 3);
}
