use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ssat::predictor::{save_checkpoint, ModelConfig};
use ssat::PredictorModel;
use tempfile::TempDir;

const TOY: &str = "\
model.embed_width = 8
model.latent_other_width = 3
model.conv_channels = 3
model.neighbor_width = 3
model.encoder_hidden = 6
model.decoder_hidden = 6
model.disc_hidden = 4
train.optimizer = adam
train.learning_rate = 0.003
train.pretrain_epochs = 2
train.epochs = 1
train.monitor_scenes = 4
train.batch_size = 4
data.train_count = 16
data.test_count = 6
attack.iterations = 5
";

fn ssat(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssat"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = ssat(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read(path: PathBuf) -> String {
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn workspace() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("toy.cfg"), TOY).unwrap();
    dir
}

fn csv_column(text: &str, name: &str) -> Vec<String> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().to_string()).collect()
}

#[test]
fn generate_writes_requested_groups_deterministically() {
    let dir = workspace();
    let out = ok(dir.path(), &["--seed", "1", "--out", "a", "generate", "--count", "100"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("straight-follow:"));
    ok(dir.path(), &["--seed", "1", "--out", "b", "generate", "--count", "100"]);
    let a = read(dir.path().join("a/scenes.csv"));
    assert_eq!(a, read(dir.path().join("b/scenes.csv")));
    assert_eq!(read(dir.path().join("a/scenes.map.csv")), read(dir.path().join("b/scenes.map.csv")));
    let mut ids = csv_column(&a, "scene_id");
    ids.dedup();
    assert_eq!(ids.len(), 100);
}

#[test]
fn generate_usage_errors_exit_2() {
    let dir = workspace();
    assert_eq!(ssat(dir.path(), &["generate", "--count", "0"]).status.code(), Some(2));
    let blocked = dir.path().join("file");
    std::fs::write(&blocked, "not a directory").unwrap();
    let out = ssat(dir.path(), &["--out", "file/sub", "generate", "--count", "3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot write"));
    assert_eq!(ssat(dir.path(), &["generate"]).status.code(), Some(2));
}

fn toy_checkpoint(dir: &Path) -> PathBuf {
    let path = dir.join("toy.ckpt");
    let model = PredictorModel::new(ModelConfig::tiny()).unwrap();
    save_checkpoint(&path, &model).unwrap();
    path
}

#[test]
fn attack_writes_rows_and_summary() {
    let dir = workspace();
    let p = dir.path();
    toy_checkpoint(p);
    ok(p, &["--seed", "3", "--out", "data", "generate", "--count", "10"]);
    ok(
        p,
        &["--out", "atk", "attack", "--model", "toy.ckpt", "--scenes", "data/scenes.csv", "--plots"],
    );
    let text = read(p.join("atk/attack_metrics.csv"));
    assert_eq!(text.lines().count(), 1 + 10 + 1);
    assert!(text.lines().last().unwrap().starts_with("mean,"));
    assert_eq!(std::fs::read_dir(p.join("atk/plots")).unwrap().count(), 10);
    let benign: f64 = csv_column(&text, "benign_ade").last().unwrap().parse().unwrap();
    let attacked: f64 = csv_column(&text, "attacked_ade").last().unwrap().parse().unwrap();
    assert!(attacked > benign, "{attacked} <= {benign}");
}

#[test]
fn zero_iterations_reproduce_benign_metrics() {
    let dir = workspace();
    let p = dir.path();
    toy_checkpoint(p);
    ok(p, &["--out", "data", "generate", "--count", "6"]);
    ok(
        p,
        &[
            "--out", "atk", "attack", "--model", "toy.ckpt", "--scenes", "data/scenes.csv", "--attack", "lat-left",
            "--iterations", "0",
        ],
    );
    let text = read(p.join("atk/attack_metrics.csv"));
    for (b, a) in [("benign_ade", "attacked_ade"), ("benign_lat", "attacked_lat"), ("benign_lon", "attacked_lon")] {
        assert_eq!(csv_column(&text, b), csv_column(&text, a));
    }
}

#[test]
fn incompatible_checkpoint_exits_3() {
    let dir = workspace();
    let p = dir.path();
    let ckpt = toy_checkpoint(p);
    let mut bytes = std::fs::read(&ckpt).unwrap();
    bytes[8] = 99;
    std::fs::write(&ckpt, bytes).unwrap();
    ok(p, &["--out", "data", "generate", "--count", "2"]);
    let out = ssat(p, &["attack", "--model", "toy.ckpt", "--scenes", "data/scenes.csv"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema version 99"));
}

#[test]
fn train_writes_run_directory_deterministically() {
    let dir = workspace();
    let p = dir.path();
    for out in ["r1", "r2"] {
        ok(p, &["--seed", "5", "--config", "toy.cfg", "--out", out, "train", "--method", "ssat"]);
    }
    for f in ["config.txt", "metrics.csv", "steps.csv", "initial.ckpt", "final.ckpt", "best.ckpt"] {
        assert!(p.join("r1").join(f).exists(), "{f}");
    }
    assert_eq!(read(p.join("r1/metrics.csv")), read(p.join("r2/metrics.csv")));
    assert_eq!(
        std::fs::read(p.join("r1/final.ckpt")).unwrap(),
        std::fs::read(p.join("r2/final.ckpt")).unwrap()
    );
    let metrics = read(p.join("r1/metrics.csv"));
    assert_eq!(metrics.lines().count(), 1 + 2 + 1);
}

#[test]
fn at_baseline_snapshot_records_disabled_losses() {
    let dir = workspace();
    let p = dir.path();
    ok(p, &["--config", "toy.cfg", "--out", "at", "train", "--method", "at-baseline"]);
    let cfg = read(p.join("at/config.txt"));
    assert!(cfg.contains("experiment.method = at-baseline\n"));
    assert!(cfg.contains("train.semi_enabled = false\n"));
    assert!(cfg.contains("train.reg_enabled = false\n"));
}

#[test]
fn matrix_and_report_cover_every_requested_cell() {
    let dir = workspace();
    let p = dir.path();
    ok(p, &["--config", "toy.cfg", "--out", "ssat", "train", "--method", "ssat"]);
    ok(p, &["--config", "toy.cfg", "--out", "benign", "train", "--method", "benign"]);
    ok(p, &["--config", "toy.cfg", "--out", "res", "matrix", "--runs", "ssat", "benign"]);
    let text = read(p.join("res/matrix.csv"));
    assert_eq!(text.lines().count(), 1 + 6);
    for line in text.lines().skip(1).filter(|l| l.starts_with("benign,")) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[4], f[5], "untrained row changed: {line}");
        assert_eq!(f[6], f[7]);
    }
    assert!(!text.contains("absent"));

    let out = ok(p, &["--out", "res", "report", "--runs", "ssat"]);
    let md = String::from_utf8_lossy(&out.stdout);
    assert!(md.contains("| ssat | ade |"));
    assert!(p.join("res/report.md").exists());
}

#[test]
fn missing_run_marks_absent_cells_and_fails() {
    let dir = workspace();
    let p = dir.path();
    ok(p, &["--config", "toy.cfg", "--out", "ssat", "train", "--method", "ssat"]);
    std::fs::remove_file(p.join("ssat/final.ckpt")).unwrap();
    let out = ssat(
        p,
        &["--config", "toy.cfg", "--out", "res", "matrix", "--runs", "ssat", "--eval-attacks", "ade,lat-right"],
    );
    assert_ne!(out.status.code(), Some(0));
    let text = read(p.join("res/matrix.csv"));
    assert_eq!(text.lines().count(), 1 + 2);
    assert!(text.lines().skip(1).all(|l| l.contains("absent")));
}

#[test]
fn bad_config_is_a_usage_error() {
    let dir = workspace();
    let p = dir.path();
    std::fs::write(p.join("bad.cfg"), "train.epochs = lots\n").unwrap();
    let out = ssat(p, &["--config", "bad.cfg", "train"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("train.epochs"));
}
