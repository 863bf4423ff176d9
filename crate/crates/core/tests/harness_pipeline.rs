mod common;

use std::path::Path;
use std::process::Command;

use vinkit::dlam::{ImuNetWeights, VisionNetWeights, WeightStore};
use vinkit::harness::*;
use vinkit::ukf::UkfError;

const BIN: &str = env!("CARGO_BIN_EXE_vinkit");

fn write_short_config(dir: &Path, duration: f64) -> std::path::PathBuf {
    let text = CANONICAL_CONFIG.replace("duration = 60.0", &format!("duration = {duration}"));
    let path = dir.join("short.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn vinkit(args: &[&str]) -> std::process::Output {
    Command::new(BIN).args(args).output().unwrap()
}

#[test]
fn canonical_file_matches_defaults() {
    assert_eq!(ExperimentConfig::from_toml(CANONICAL_CONFIG).unwrap(), ExperimentConfig::default());
}

#[test]
fn zero_weight_dlam_equals_nominal_run() {
    let gap = common::pipeline_equivalence(&common::short_config(5.0, 3), 94, 60);
    assert!(gap <= 1e-12, "gap {gap:e}");
}

#[test]
fn synthetic_runs_are_deterministic() {
    let cfg = common::short_config(3.0, 9);
    let a = run_synthetic(&cfg, None, true).unwrap();
    let b = run_synthetic(&cfg, None, true).unwrap();
    assert_eq!(format_estimates(&a.output.estimates), format_estimates(&b.output.estimates));
    let c = run_synthetic(&common::short_config(3.0, 10), None, true).unwrap();
    assert_ne!(format_estimates(&a.output.estimates), format_estimates(&c.output.estimates));
}

#[test]
fn estimates_are_emitted_per_frame() {
    let cfg = common::short_config(2.0, 1);
    let run = run_synthetic(&cfg, None, true).unwrap();
    let frames = run.scenario.tracks.frames.len();
    assert_eq!(run.output.estimates.len(), frames);
    assert_eq!(run.output.estimates[0].t, run.scenario.truth[0].t);
    assert!(run.output.updates > 0 && run.output.updates < frames);
}

#[test]
fn loss_needs_more_samples_than_the_skip() {
    let cfg = common::short_config(4.0, 1);
    let run = run_synthetic(&cfg, None, true).unwrap();
    let big = LossConfig { skip: 10_000, ..cfg.loss.clone() };
    assert!(matches!(run.loss(&big), Err(HarnessError::SeriesTooShort { .. })));
    let l = run.loss(&cfg.loss).unwrap();
    let want = cfg.loss.w_q * l.mse_q + cfg.loss.w_p * l.mse_p + cfg.loss.w_v * l.mse_v;
    assert!((l.loss - want).abs() <= 1e-12 * want.max(1.0));
}

#[test]
fn exit_codes_follow_error_class() {
    assert_eq!(HarnessError::Numerical(UkfError::InnovationSingular).exit_code(), 3);
    assert_eq!(HarnessError::Data("x".into()).exit_code(), 2);
    assert_eq!(HarnessError::Config("x".into()).exit_code(), 2);
}

#[test]
fn cli_simulate_run_eval() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_short_config(dir.path(), 3.0);
    let cfg = cfg.to_str().unwrap();
    let data = dir.path().join("data");
    let data_s = data.to_str().unwrap();

    let out = vinkit(&["simulate", "--config", cfg, "--seed", "4", "--out", data_s]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["imu.csv", "groundtruth.csv", "tracks.csv", "calib.toml", "landmarks_truth.csv"] {
        assert!(data.join(f).exists(), "missing {f}");
    }
    assert!(!data.join("landmarks.csv").exists());

    let run1 = dir.path().join("run1");
    let out = vinkit(&["run", "--config", cfg, "--dataset", data_s, "--out", run1.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("| nominal |"), "{stdout}");
    for f in ["estimates.csv", "errors.csv", "loss.toml"] {
        assert!(run1.join(f).exists(), "missing {f}");
    }

    // Re-running on the same dataset reproduces the estimates byte for byte.
    let run2 = dir.path().join("run2");
    let out = vinkit(&["run", "--config", cfg, "--dataset", data_s, "--out", run2.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(
        std::fs::read(run1.join("estimates.csv")).unwrap(),
        std::fs::read(run2.join("estimates.csv")).unwrap()
    );

    let est = run1.join("estimates.csv");
    let out = vinkit(&[
        "eval", "--config", cfg, "--estimates", est.to_str().unwrap(),
        "--truth", data.join("groundtruth.csv").to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("| eval |"));

    // Known-map mode once the true map is supplied.
    std::fs::copy(data.join("landmarks_truth.csv"), data.join("landmarks.csv")).unwrap();
    let run3 = dir.path().join("run3");
    let out = vinkit(&["run", "--config", cfg, "--dataset", data_s, "--out", run3.to_str().unwrap()]);
    assert!(out.status.success());
}

#[test]
fn cli_weights_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_short_config(dir.path(), 4.0);
    let w = dir.path().join("zero.vkws");
    WeightStore::from_networks(&ImuNetWeights::zeros(4), &VisionNetWeights::zeros(94, 60), 1.0)
        .save(&w)
        .unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let out = vinkit(&["run", "--config", cfg.to_str().unwrap(), "--weights", w.to_str().unwrap(), "--out", a.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("| adaptive |"));
    let out = vinkit(&["run", "--config", cfg.to_str().unwrap(), "--no-dlam", "--out", b.to_str().unwrap()]);
    assert!(out.status.success());
    let pa = parse_estimates_csv(&a.join("estimates.csv")).unwrap();
    let pb = parse_estimates_csv(&b.join("estimates.csv")).unwrap();
    assert_eq!(pa, pb);

    std::fs::write(&w, b"garbage").unwrap();
    let out = vinkit(&["run", "--config", cfg.to_str().unwrap(), "--weights", w.to_str().unwrap(), "--out", a.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cli_exit_codes() {
    assert_eq!(vinkit(&["--help"]).status.code(), Some(0));
    assert_eq!(vinkit(&["--version"]).status.code(), Some(0));
    assert_eq!(vinkit(&[]).status.code(), Some(1));
    assert_eq!(vinkit(&["run"]).status.code(), Some(1));
    assert_eq!(vinkit(&["frobnicate"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let missing = dir.path().join("nope");
    assert_eq!(
        vinkit(&["run", "--dataset", missing.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.code(),
        Some(2)
    );
    let bad_cfg = dir.path().join("bad.toml");
    std::fs::write(&bad_cfg, "[sim]\nduration = -1.0\n").unwrap();
    assert_eq!(
        vinkit(&["simulate", "--config", bad_cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.code(),
        Some(2)
    );
}
