//! End-to-end tests of the `fresgld` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fresgld::config::{preset, ExperimentConfig, SamplerChoice, TargetConfig, VarianceConfig};
use fresgld::samplers::StepSchedule;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fresgld"))
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("fresgld-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// A config small enough for subsecond runs.
fn small_config(name: &str, out_dir: &Path) -> ExperimentConfig {
    let mut cfg = preset("paper-mixture-fixed").unwrap();
    cfg.name = name.to_string();
    cfg.n_steps = 2_000;
    cfg.n_retained = 200;
    cfg.burn_in = Some(500);
    cfg.seeds = vec![1, 2];
    cfg.output_dir = out_dir.join(name);
    cfg
}

fn write_config(cfg: &ExperimentConfig, dir: &Path) -> PathBuf {
    let path = dir.join(format!("{}.toml", cfg.name));
    std::fs::write(&path, cfg.to_toml().unwrap()).unwrap();
    path
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn preset_prints_parseable_toml() {
    let out = bin().args(["preset", "paper-mixture-fixed"]).output().unwrap();
    assert!(out.status.success());
    let cfg = ExperimentConfig::from_toml(&stdout_of(&out)).unwrap();
    assert_eq!(cfg.name, "paper-mixture-fixed");
    assert_eq!(cfg.sampler, SamplerChoice::FResgld);
}

#[test]
fn unknown_preset_exits_with_config_error() {
    let out = bin().args(["preset", "nope"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("unknown preset"), "stderr: {err}");
    assert!(err.contains("paper-mixture-fixed"), "stderr: {err}");
}

#[test]
fn run_writes_expected_outputs() {
    let dir = temp_dir("run");
    let cfg = small_config("smoke", &dir);
    let path = write_config(&cfg, &dir);
    let out = bin()
        .args(["run"])
        .arg(&path)
        .arg("--emit-gnuplot-script")
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout_of(&out).contains("w2_to_truth"));
    let out_dir = cfg.output_dir;
    for file in [
        "trace-seed-1.csv",
        "samples-seed-1.csv",
        "kde-seed-1.csv",
        "metrics-seed-1.json",
        "samples-seed-2.csv",
        "aggregate.json",
        "plot.gp",
    ] {
        assert!(out_dir.join(file).exists(), "missing {file}");
    }
    // Retained sample files carry a header plus exactly n_retained rows.
    let samples = std::fs::read_to_string(out_dir.join("samples-seed-1.csv")).unwrap();
    assert_eq!(samples.lines().count(), 1 + 200);
    assert!(samples.starts_with("theta_0\n"));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = temp_dir("determinism");
    let mut first = small_config("det-a", &dir);
    first.output_dir = dir.join("a");
    let mut second = first.clone();
    second.name = "det-b".to_string();
    second.output_dir = dir.join("b");
    for cfg in [&first, &second] {
        let path = write_config(cfg, &dir);
        let out = bin().args(["run"]).arg(&path).output().unwrap();
        assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    for file in ["trace-seed-1.csv", "samples-seed-1.csv", "kde-seed-1.csv", "metrics-seed-1.json"] {
        let a = std::fs::read(dir.join("a").join(file)).unwrap();
        let b = std::fs::read(dir.join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn output_dir_env_override() {
    let dir = temp_dir("env");
    let cfg = small_config("enved", &dir);
    let path = write_config(&cfg, &dir);
    let override_dir = dir.join("override");
    let out = bin()
        .env("FRESGLD_OUTPUT_DIR", &override_dir)
        .args(["run"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(override_dir.join("enved").join("aggregate.json").exists());
    assert!(!cfg.output_dir.exists());
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn malformed_config_exits_one() {
    let dir = temp_dir("badtoml");
    let path = dir.join("bad.toml");
    std::fs::write(&path, "this is not toml = [").unwrap();
    let out = bin().args(["run"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn inadmissible_step_size_exits_two() {
    let dir = temp_dir("step");
    let mut cfg = small_config("too-big", &dir);
    // Low chain: tau = 1, s = 2 admits eta < 0.5; exceed it.
    cfg.eta = StepSchedule::Constant(0.6);
    cfg.variance_estimator = VarianceConfig::Known;
    let path = write_config(&cfg, &dir);
    let out = bin().args(["run"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn compare_ranks_variants() {
    let dir = temp_dir("compare");
    let a = small_config("variant-a", &dir);
    let mut b = small_config("variant-b", &dir);
    b.sampler = SamplerChoice::Resgld;
    let pa = write_config(&a, &dir);
    let pb = write_config(&b, &dir);
    let out = bin().args(["compare"]).arg(&pa).arg(&pb).output().unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = stdout_of(&out);
    assert!(text.contains("metric: w2_to_truth"), "stdout: {text}");
    assert!(text.contains("#1"), "stdout: {text}");
    assert!(text.contains("variant-a vs variant-b"), "stdout: {text}");
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn compare_rejects_mismatched_targets() {
    let dir = temp_dir("compare-bad");
    let a = small_config("mix", &dir);
    let mut b = small_config("quad", &dir);
    b.target = TargetConfig::Quadratic { m: 1.0, dim: 2 };
    let pa = write_config(&a, &dir);
    let pb = write_config(&b, &dir);
    let out = bin().args(["compare"]).arg(&pa).arg(&pb).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn diag_w2_between_sample_files() {
    let dir = temp_dir("diag");
    let a = dir.join("a.csv");
    let b = dir.join("b.csv");
    std::fs::write(&a, "theta_0\n0.0\n1.0\n2.0\n").unwrap();
    std::fs::write(&b, "theta_0\n1.0\n2.0\n3.0\n").unwrap();
    let out = bin().args(["diag", "w2"]).arg(&a).arg(&b).output().unwrap();
    assert!(out.status.success());
    let d: f64 = stdout_of(&out).trim().parse().unwrap();
    assert!((d - 1.0).abs() < 1e-12, "distance {d}");
    // Non-numeric rows past the header are rejected.
    std::fs::write(&b, "theta_0\n1.0\nnot-a-number\n").unwrap();
    let out = bin().args(["diag", "w2"]).arg(&a).arg(&b).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let _ = std::fs::remove_dir_all(&dir);
}
