use std::path::Path;
use std::process::{Command, Output};

const EVOLVE: &str = r#"schema_version = 1
experiment = "evolve"

[grid]
dim = 1
points = 64
half_length = 12.0

[physics]
m = 1.0
alpha = 1.5
gamma = 0.5
lambda = 1

[initial_data]
kind = "gaussian"
width = 1.0

[time]
t_final = 0.5
observe_every = 0.05
step = { mode = "fixed", dt = 0.01 }

[outputs]
checkpoint_every = 0.25
"#;

fn fhnls(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fhnls"))
        .args(args)
        .output()
        .unwrap()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn run_writes_outputs_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("evolve.toml");
    std::fs::write(&config, EVOLVE).unwrap();
    let out = dir.path().join("out");
    let result = fhnls(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        result.status.success(),
        "{}",
        String::from_utf8_lossy(&result.stderr)
    );
    let m = manifest(&out);
    assert_eq!(m["experiment"], "evolve");
    assert_eq!(m["status"], "completed");
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    assert!(out.join("observables.csv").exists());
}

#[test]
fn invalid_config_fails_with_the_field_name() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(&config, EVOLVE.replace("alpha = 1.5", "alpha = 2.5")).unwrap();
    let result = fhnls(&["run", "--config", config.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&result.stderr).contains("physics.alpha"));
}

#[test]
fn resume_continues_next_to_the_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("evolve.toml");
    std::fs::write(&config, EVOLVE).unwrap();
    let out = dir.path().join("out");
    assert!(fhnls(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap()
    ])
    .status
    .success());
    let ck = out.join("checkpoint_00000025.bin");
    let result = fhnls(&[
        "resume",
        "--checkpoint",
        ck.to_str().unwrap(),
        "--t-final",
        "1.0",
    ]);
    assert!(
        result.status.success(),
        "{}",
        String::from_utf8_lossy(&result.stderr)
    );
    let m = manifest(&out.join("resume"));
    assert_eq!(m["report"]["t_start"], 0.25);
    assert_eq!(m["report"]["summary"]["t_end"], 1.0);
}

#[test]
fn ground_state_prints_a_converged_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gs");
    let result = fhnls(&[
        "ground-state",
        "--alpha",
        "1.5",
        "--gamma",
        "0.5",
        "--n",
        "1",
        "--points",
        "64",
        "--half-length",
        "20",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        result.status.success(),
        "{}",
        String::from_utf8_lossy(&result.stderr)
    );
    let report: serde_json::Value = serde_json::from_slice(&result.stdout).unwrap();
    assert_eq!(report["kind"], "ground_state");
    assert!(report["summary"]["residual"].as_f64().unwrap() < 1e-6);
    assert!(out.join("ground_state.bin").exists());
}

#[test]
fn quick_inequality_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ineq");
    let result = fhnls(&[
        "check-inequalities",
        "--suite",
        "quick",
        "--seed",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        result.status.success(),
        "{}",
        String::from_utf8_lossy(&result.stderr)
    );
    let report: serde_json::Value = serde_json::from_slice(&result.stdout).unwrap();
    assert_eq!(report["reports"].as_array().unwrap().len(), 6);
    assert!(out.join("inequalities.json").exists());
}
