use std::path::Path;
use std::process::{Command, Output};

fn dypro(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dypro"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn small_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("config.json");
    let text = format!(
        r#"{{
  "seed": 3,
  "model": {{"latent": 4, "time_width": 2, "hidden": 4, "context": 2, "horizon": 2, "bins": [0, 1, 2, 3, 4, 5, 6]}},
  "train": {{"max_epochs": 2, "augmentation": {{"variants": 1}}}},
  "cv": {{"k": 3, "repeats": 1}},
  "eval": {{"bootstrap": 100}},
  "simulate": {{"n": 45}}{extra}
}}"#
    );
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&dypro(&["--help"])), 0);
    assert_eq!(code(&dypro(&["frobnicate"])), 1);
    assert_eq!(code(&dypro(&["crossval"])), 1);
    assert_eq!(code(&dypro(&["crossval", "--config", "/nonexistent/config.json"])), 1);
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"trian": {}}"#).unwrap();
    let out = dypro(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("trian"));
    std::fs::write(&cfg, r#"{"cv": {"k": 1}}"#).unwrap();
    assert_eq!(code(&dypro(&["crossval", "--config", cfg.to_str().unwrap()])), 1);
}

#[test]
fn malformed_cohort_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cohort = dir.path().join("cohort.json");
    std::fs::write(&cohort, r#"{"schema_version": 1, "patients": "no"}"#).unwrap();
    let extra = format!(r#", "paths": {{"cohort": "{}"}}"#, cohort.display());
    let cfg = small_config(dir.path(), &extra);
    assert_eq!(code(&dypro(&["crossval", "--config", &cfg])), 2);
}

#[test]
fn simulate_then_crossval_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let sim_dir = dir.path().join("sim");
    let out = dypro(&["simulate", "--config", &cfg, "--out", sim_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(sim_dir.join("truth.json").exists());

    let extra = format!(
        r#", "paths": {{"cohort": "{}"}}"#,
        sim_dir.join("cohort.json").display()
    );
    let cfg = small_config(dir.path(), &extra);
    let mut csvs = Vec::new();
    for run in ["a", "b"] {
        let out_dir = dir.path().join(run);
        let out = dypro(&["crossval", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        for f in ["report.json", "curves.csv", "logs/repeat0_fold2.log"] {
            assert!(out_dir.join(f).exists(), "{f}");
        }
        csvs.push(std::fs::read(out_dir.join("metrics.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
    let text = String::from_utf8(csvs[0].clone()).unwrap();
    assert!(text.starts_with("repeat,fold,task,cindex,ibs,auc1,auc3,auc5,mae\n"));
    assert_eq!(text.lines().count(), 1 + 3 * 2);

    let rescored = dir.path().join("rescored");
    let report = dir.path().join("a/report.json");
    let out = dypro(&[
        "evaluate",
        "--config",
        &cfg,
        "--report",
        report.to_str().unwrap(),
        "--out",
        rescored.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read(rescored.join("metrics.csv")).unwrap(), csvs[0]);
}

#[test]
fn ablate_reports_the_blocked_cascade() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let out_dir = dir.path().join("abl");
    let out = dypro(&[
        "ablate",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
        "--variant",
        "full",
        "--variant",
        "no_cascade",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(out_dir.join("ablation.csv")).unwrap();
    let norms: Vec<&str> = table.lines().skip(1).map(|l| l.rsplit(',').next().unwrap()).collect();
    assert_eq!(norms.len(), 4);
    assert_ne!(norms[0], "0");
    assert_eq!(norms[2..], ["0", "0"]);
    assert!(out_dir.join("no_cascade/metrics.csv").exists());
}

#[test]
fn train_writes_log_and_curves() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let out_dir = dir.path().join("t");
    let out = dypro(&["train", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let log = std::fs::read_to_string(out_dir.join("train.log")).unwrap();
    assert!(log.starts_with("epoch 1 train_loss "));
    let curves = std::fs::read_to_string(out_dir.join("curves.csv")).unwrap();
    assert_eq!(curves.lines().count(), 1 + 45 * 2 * 6);
}

#[test]
fn diverging_training_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let text = std::fs::read_to_string(&cfg).unwrap().replace(
        r#""max_epochs": 2"#,
        r#""max_epochs": 3, "lr": 1e250, "weight_decay": 0"#,
    );
    std::fs::write(&cfg, text).unwrap();
    let out_dir = dir.path().join("x");
    let out = dypro(&["crossval", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("metrics.csv").exists());
}

#[test]
fn gradcheck_needs_no_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dypro(&["gradcheck", "--seed", "2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("max relative error"));
    assert!(dir.path().join("gradcheck.json").exists());
    assert_eq!(code(&dypro(&["gradcheck", "--backbone", "gin"])), 1);
}
