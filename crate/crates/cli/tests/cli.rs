//! Black-box CLI tests: subcommands, exit codes, and emitted files.

use std::fs;
use std::path::Path;
use std::process::Command;

fn tncirc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tncirc"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn ground_state_two_sites_matches_exact_energy() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gs");
    let status = tncirc()
        .args(["ground-state", "--rows", "1", "--cols", "2", "--chi", "2", "--sweeps", "3"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());

    let record: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("ground_state.json")).unwrap()).unwrap();
    let energy = record["energy"].as_f64().unwrap();
    assert!((energy + 0.75).abs() < 1e-9, "energy {energy}");
    assert!(record["delta_E"].as_f64().unwrap().abs() < 1e-8);
    assert!(out.join("ground.mps").exists());
}

#[test]
fn tnbm_training_emits_mps_and_loss_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{"task": {"type": "cardinality", "n": 4, "c": 2}, "tnbm": {"sweeps": 6}}"#,
    );
    let out = dir.path().join("tnbm");
    let status = tncirc()
        .arg("train-tnbm")
        .arg("--config")
        .arg(&config)
        .arg("--chi")
        .arg("4")
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());

    let csv = fs::read_to_string(out.join("losses.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7); // header + 6 sweeps
    assert!(out.join("tnbm.mps").exists());
}

#[test]
fn decompose_consumes_the_tnbm_container() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{"task": {"type": "cardinality", "n": 4, "c": 2}, "tnbm": {"sweeps": 6}}"#,
    );
    let out = dir.path().join("work");
    assert!(tncirc()
        .arg("train-tnbm")
        .arg("--config")
        .arg(&config)
        .args(["--chi", "2"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap()
        .success());

    let status = tncirc()
        .arg("decompose")
        .arg("--mps")
        .arg(out.join("tnbm.mps"))
        .args(["--layers", "2", "--sweeps", "3"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());

    let circuit: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("circuit.json")).unwrap()).unwrap();
    assert_eq!(circuit["num_qubits"], 4);
    assert!(circuit["layers"].as_array().unwrap().len() >= 1);
    let history = fs::read_to_string(out.join("fidelity_history.csv")).unwrap();
    assert!(history.starts_with("step,fidelity\n"));
    assert!(history.lines().count() >= 2);
}

#[test]
fn invalid_configuration_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{"task": {"type": "cardinality", "n": 4, "c": 9}}"#,
    );
    let status = tncirc()
        .arg("train-qcbm")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("x"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn qcbm_run_emits_artifacts_with_plot() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{
            "task": {"type": "cardinality", "n": 4, "c": 2},
            "layers": 2,
            "init": {"mode": "random"},
            "cmaes": {"lambda": 8, "max_iterations": 4, "tolfun": 0.0}
        }"#,
    );
    let out = dir.path().join("qcbm");
    let status = tncirc()
        .arg("train-qcbm")
        .arg("--config")
        .arg(&config)
        .args(["--reps", "2", "--plot"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());

    let csv = fs::read_to_string(out.join("losses.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 4); // header + reps x iterations
    let records: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
    assert_eq!(records.as_array().unwrap().len(), 2);
    let svg = fs::read_to_string(out.join("plot.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
}

#[test]
fn synergy_requires_an_mps_init() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{"task": {"type": "cardinality", "n": 4, "c": 2}, "init": {"mode": "random"}}"#,
    );
    let status = tncirc()
        .arg("synergy")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("x"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn synergy_pipeline_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{
            "task": {"type": "cardinality", "n": 4, "c": 2},
            "layers": 2,
            "init": {"mode": "mps", "chi": 2},
            "tnbm": {"sweeps": 10},
            "cmaes": {"lambda": 8, "max_iterations": 3, "tolfun": 0.0}
        }"#,
    );
    let out = dir.path().join("syn");
    let status = tncirc()
        .arg("synergy")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());

    let records: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
    let record = &records.as_array().unwrap()[0];
    assert!(record["decomposition_fidelity"].as_f64().unwrap() > 0.9);
    assert!(record["mps_loss"].is_number());
}

#[test]
fn grad_variance_emits_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gv");
    let status = tncirc()
        .args(["grad-variance", "--qubits", "4", "--layers", "2", "--reps", "8", "--init", "random", "--seed", "1"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = fs::read_to_string(out.join("grad_variance.csv")).unwrap();
    assert!(csv.starts_with("num_qubits,layers,topology,init,variance,ci_low,ci_high\n"));
    assert_eq!(csv.lines().count(), 2);
    assert!(out.join("grad_variance.json").exists());
}
