//! End-to-end checks of the binary: exit codes, output files, and the
//! output-directory environment variable.

use std::process::{Command, Output};

fn bench_cmd() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dpcov-bench"))
}

fn run_args(args: &[&str]) -> Output {
    bench_cmd().args(args).output().expect("binary runs")
}

#[test]
fn successful_run_exits_zero_and_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_args(&[
        "run",
        "--p",
        "8",
        "--sr",
        "0.2",
        "--n-grid",
        "40,80",
        "--trials",
        "2",
        "--master-seed",
        "3",
        "--out-dir",
        dir.path().to_str().unwrap(),
        "--svg",
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    for file in ["trials.csv", "summary.csv", "timings.csv", "series_custom.csv", "errors_l2.svg"] {
        assert!(dir.path().join(file).exists(), "{file} missing");
    }
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("mean_l2"), "summary table missing: {stdout}");
}

#[test]
fn config_error_exits_one() {
    let out = run_args(&["run", "--sr", "1.5"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("invalid config"), "stderr: {stderr}");

    let out = run_args(&["run", "--setting", "nonsense"]);
    assert_eq!(out.status.code(), Some(1));

    let out = run_args(&["run", "--algorithm", "banded", "--p", "5", "--n-grid", "20", "--trials", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("banded"), "stderr: {stderr}");
}

#[test]
fn config_file_is_read_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("exp.toml");
    std::fs::write(&config_path, "p = 6\nsr = 0.2\nn_grid = [30]\ntrials = 3\n").unwrap();
    let out_dir = dir.path().join("results");
    let out = run_args(&[
        "run",
        "--config",
        config_path.to_str().unwrap(),
        "--trials",
        "1",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let trials = std::fs::read_to_string(out_dir.join("trials.csv")).unwrap();
    // Header plus exactly one trial row: the flag overrode trials = 3.
    assert_eq!(trials.lines().count(), 2, "{trials}");
}

#[test]
fn partial_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    // lambda far too small for the sparse base: the PSD check fails in
    // every trial, which is a recorded numeric failure, not an abort.
    let out = run_args(&[
        "run",
        "--p",
        "10",
        "--sr",
        "0.4",
        "--lambda",
        "1e-6",
        "--n-grid",
        "20",
        "--trials",
        "2",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let trials = std::fs::read_to_string(dir.path().join("trials.csv")).unwrap();
    assert!(trials.contains("failed"));
}

#[test]
fn out_dir_env_var_is_the_default() {
    let dir = tempfile::tempdir().unwrap();
    let out = bench_cmd()
        .args(["run", "--p", "5", "--n-grid", "20", "--trials", "1"])
        .env("DPCOV_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("trials.csv").exists());
}

#[test]
fn gen_model_writes_matrix_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_args(&[
        "gen-model",
        "--p",
        "12",
        "--sr",
        "0.25",
        "--seed",
        "9",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let matrix = dpcov::SymMatrix::read_csv(dir.path().join("model.csv")).unwrap();
    assert_eq!(matrix.dim(), 12);
    let meta = std::fs::read_to_string(dir.path().join("model.meta.json")).unwrap();
    for key in ["\"p\": 12", "\"sr\": 0.25", "\"lambda\": 50", "\"c\": 200", "\"seed\": 9"] {
        assert!(meta.contains(key), "metadata missing {key}: {meta}");
    }
}

#[test]
fn list_algorithms_names_the_builtins() {
    let out = run_args(&["list-algorithms"]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout, "central\nlocal\nnaive\n");
}

#[test]
fn help_exits_zero() {
    let out = run_args(&["--help"]);
    assert!(out.status.success());
    let out = run_args(&["run", "--help"]);
    assert!(out.status.success());
}

#[test]
fn missing_subcommand_exits_one() {
    let out = run_args(&[]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn debug_matrix_format_round_trips_through_files() {
    // Matrix CSV written by gen-model is plain text with '.' decimals.
    let dir = tempfile::tempdir().unwrap();
    run_args(&[
        "gen-model",
        "--p",
        "4",
        "--sr",
        "0.0",
        "--seed",
        "1",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    let body = std::fs::read_to_string(dir.path().join("model.csv")).unwrap();
    assert_eq!(body, "0.25,0,0,0\n0,0.25,0,0\n0,0,0.25,0\n0,0,0,0.25\n");
}
