use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn wallflip(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_wallflip"));
    cmd.args(args).env_remove("WALLFLIP_SEED").env_remove("WALLFLIP_PARALLELISM");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, json: &str) -> String {
    let path = dir.join("plan.json");
    fs::write(&path, json).unwrap();
    path.to_str().unwrap().to_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn verify_writes_a_report_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"criteria": [10], "fourier": {"functions": 5}}"#);
    let out = dir.path().join("res");
    let o = wallflip(&["verify", "norms", "--config", &cfg, "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("criterion 10 [lattice Fourier identity]: PASS"));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report_norms.json")).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["criteria"][0]["id"], 10);
    assert!(out.join("checks_norms.csv").exists());
}

#[test]
fn failing_gate_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // an impossible tolerance
    let cfg = write_config(dir.path(), r#"{"criteria": [10], "fourier": {"functions": 2, "tolerance": -1.0}}"#);
    let o = wallflip(&["verify", "norms", "--config", &cfg, "--out", dir.path().to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn bad_plans_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"no_such_key": 1}"#);
    assert_eq!(wallflip(&["verify", "all", "--config", &cfg], &[]).status.code(), Some(2));
    let cfg = write_config(dir.path(), r#"{"schema_version": 7}"#);
    assert_eq!(wallflip(&["simulate", "--config", &cfg], &[]).status.code(), Some(2));
    assert_eq!(wallflip(&["verify", "all", "--config", "/nonexistent.json"], &[]).status.code(), Some(2));
}

#[test]
fn window_violations_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"simulate": {"lattice_size": 5}}"#);
    let o = wallflip(&["simulate", "--config", &cfg, "--dry-run"], &[]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn seed_flag_beats_environment() {
    let o = wallflip(&["verify", "all", "--dry-run", "--seed", "11"], &[("WALLFLIP_SEED", "5")]);
    assert_eq!(o.status.code(), Some(0));
    let plan: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(plan["seed"], 11);
    let o = wallflip(&["verify", "all", "--dry-run"], &[("WALLFLIP_SEED", "5"), ("WALLFLIP_PARALLELISM", "2")]);
    let plan: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(plan["seed"], 5);
    assert_eq!(plan["parallelism"], 2);
}

#[test]
fn simulate_and_export_write_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"simulate": {"replicas": 1, "horizon": 0.5}}"#);
    let out = dir.path().join("sim");
    let o = wallflip(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["observables.csv", "summary.json", "replica_0/events.jsonl", "replica_0/intervals.csv", "replica_0/reflection.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let o = wallflip(&["export", "pmf", "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0));
    let pmf = fs::read_to_string(out.join("pmf_n10.csv")).unwrap();
    assert!(pmf.lines().count() > 2);
}

#[test]
fn unknown_suite_is_a_usage_error() {
    let o = wallflip(&["verify", "everything"], &[]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown suite"));
}
