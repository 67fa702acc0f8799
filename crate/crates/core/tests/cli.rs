use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qtranscode::cli::{SHADOW_HEADER, SWEEP_HEADER};

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn qtranscode(args: &[&str]) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qtranscode"));
    cmd.args(args).env("QTRANSCODE_DATA_DIR", data_dir());
    cmd
}

fn stdout_of(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

const SMALL: [&str; 8] = ["--limit", "32", "--set", "test_limit=8", "--set", "epochs=3", "--set", "hidden=8"];

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn encode_reports_round_trip() {
    // rho = diag(0.36, 0.64); at eps = 0.5 the spectrum is (0.43, 0.57).
    let out = stdout_of(&qtranscode(&["encode", "--y", "0.6,0.8", "--n", "2", "--eps", "0.5"]).output().unwrap());
    assert!(out.contains("n=2\n"));
    assert!(out.contains("decoded=0.600000000000,0.800000000000"));
    assert!(out.contains("purity=0.539200000000"), "{out}");
    assert!(out.contains("noisy_purity=0.509800000000"), "{out}");

    // Diagonal slots come back nonnegative.
    let out = stdout_of(&qtranscode(&["encode", "--y", "0.6,-0.8"]).output().unwrap());
    assert!(out.contains("decoded=0.600000000000,0.800000000000"), "{out}");
}

#[test]
fn sweep_grid_cardinality_and_sentinels() {
    let mut args = vec!["sweep", "--eps", "0,0.5,1", "--n", "2,4", "--k", "1,3", "--seed", "0"];
    args.extend(SMALL);
    let csv = stdout_of(&qtranscode(&args).output().unwrap());
    assert_eq!(csv.lines().next(), Some(SWEEP_HEADER));
    let rows = rows(&csv);
    assert_eq!(rows.len(), 24);
    assert_eq!(rows.iter().filter(|r| r[0] == "proposed").count(), 12);
    for r in &rows {
        if r[0] == "qpie" && r[1] == "0" {
            assert_eq!(r[5], "inf");
            assert_eq!(r[7], "nan");
        }
        if r[0] == "proposed" && r[1] == "1" {
            assert!(r[5].parse::<f64>().unwrap().is_finite());
        }
        assert_eq!(r[8], "0");
    }
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.cfg");
    std::fs::write(&cfg, "# desk run\neps=0.5\nn=2\nk=2\nseeds=5\nepochs=2\nlimit=16\ntest_limit=4\n").unwrap();
    let out = dir.path().join("out.csv");
    let status = qtranscode(&["sweep", "--config", cfg.to_str().unwrap(), "--eps", "0.25", "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let rows = rows(&std::fs::read_to_string(out).unwrap());
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r[1] == "0.25" && r[2] == "2" && r[4] == "5"));
}

fn sweep_with_checkpoints(dir: &Path, train_in_place: bool) -> Output {
    let mut args = vec!["sweep", "--eps", "0.3", "--n", "2", "--k", "2", "--seed", "1", "--checkpoint"];
    args.push(dir.to_str().unwrap());
    args.extend(SMALL);
    let flag = format!("train_in_place={train_in_place}");
    args.extend(["--set", flag.as_str()]);
    qtranscode(&args).output().unwrap()
}

#[test]
fn sweep_reuses_saved_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let missing = sweep_with_checkpoints(dir.path(), false);
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).contains("missing checkpoint"));

    let trained = stdout_of(&sweep_with_checkpoints(dir.path(), true));
    assert!(dir.path().join("codec-n2-k2-s1.qtc").exists());
    let reused = stdout_of(&sweep_with_checkpoints(dir.path(), false));
    assert_eq!(trained, reused);
}

#[test]
fn train_writes_loadable_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("model.qtc");
    let mut args = vec!["train", "--eps", "0.2", "--n", "2", "--k", "3", "--checkpoint", ckpt.to_str().unwrap()];
    args.extend(SMALL);
    let log = stdout_of(&qtranscode(&args).output().unwrap());
    assert!(log.starts_with("epoch,loss\n"));
    assert_eq!(log.lines().count(), 4);
    let params = qtranscode::checkpoint::load(&ckpt).unwrap();
    assert_eq!((params.dims.n, params.dims.observables, params.dims.classes), (2, 3, 10));
}

#[test]
fn baseline_and_shadow_bench_outputs() {
    let csv = stdout_of(&qtranscode(&["baseline", "--eps", "0.5", "--shots", "64", "--set", "test_limit=4"]).output().unwrap());
    let baseline = rows(&csv);
    assert_eq!(baseline.len(), 2);
    assert_eq!((baseline[0][0].as_str(), baseline[1][0].as_str()), ("qpie", "qpie-sampled"));

    let csv = stdout_of(
        &qtranscode(&["shadow-bench", "--k", "3", "--set", "bench_shots=200,800", "--set", "bench_trials=4"])
            .output()
            .unwrap(),
    );
    assert_eq!(csv.lines().next(), Some(SHADOW_HEADER));
    assert_eq!(rows(&csv).len(), 2);

    let empty = qtranscode(&["shadow-bench", "--set", "bench_shots="]).output().unwrap();
    assert!(!empty.status.success());
}

#[test]
fn bad_inputs_fail_cleanly() {
    let bad_eps = qtranscode(&["sweep", "--eps", "1.5"]).output().unwrap();
    assert!(!bad_eps.status.success());
    let no_data = Command::new(env!("CARGO_BIN_EXE_qtranscode"))
        .args(["baseline", "--data-dir", "/nonexistent"])
        .output()
        .unwrap();
    assert!(!no_data.status.success());
    assert!(String::from_utf8_lossy(&no_data.stderr).starts_with("error:"));
}
