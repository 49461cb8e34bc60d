use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cad::data::read_corpus;
use cad::inference::naive_labels;
use cad::model;
use cad::trainer::load_checkpoint;

struct Workspace {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let config = serde_json::json!({
            "generate": { "videos_per_activity": 4, "frames": [30, 50], "feature_dim": 8, "activities": 3, "actions": 6, "shared_actions": 2, "actions_per_activity": [1, 6] },
            "model": { "N": 6 },
            "train": { "epochs": 4 },
            "paths": {
                "manifest": root.join("data/manifest.json"),
                "out_dir": root.join("out"),
                "checkpoint": root.join("out/model.cadc"),
            },
        });
        std::fs::write(root.join("run.json"), serde_json::to_string_pretty(&config).unwrap()).unwrap();
        Self { _dir: dir, root }
    }

    fn cad(&self, cmd: &str, extra: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_cad"))
            .arg(cmd)
            .arg("--config")
            .arg(self.root.join("run.json"))
            .args(extra)
            .output()
            .unwrap()
    }

    fn ok(&self, cmd: &str, extra: &[&str]) {
        let out = self.cad(cmd, extra);
        assert_eq!(out.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }
}

fn stderr_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.lines().last().expect("an error line")).unwrap()
}

#[test]
fn generate_train_segment_eval_recognize() {
    let ws = Workspace::new();
    for cmd in ["generate", "train", "segment", "eval", "recognize"] {
        ws.ok(cmd, &[]);
    }
    for f in [
        "data/manifest.json",
        "data/generator_truth.json",
        "out/model.cadc",
        "out/loss_trace.tsv",
        "out/activity_plans.json",
        "out/per_video_mof.tsv",
        "out/recognition.tsv",
        "out/recognition.json",
        "out/effective_config.json",
    ] {
        assert!(ws.path(f).exists(), "{f} missing");
    }
    let trace = std::fs::read_to_string(ws.path("out/loss_trace.tsv")).unwrap();
    assert_eq!(trace.lines().count(), 1 + 4);

    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ws.path("out/metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["videos"], 12);
    for key in ["mof", "mop", "moc"] {
        let v = metrics[key].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&v), "{key} = {v}");
    }
    assert!(metrics["f1"].is_object());
    assert!(metrics["recognition"]["accuracy"].is_number());

    let corpus = read_corpus(&ws.path("data/manifest.json")).unwrap();
    let v = &corpus.videos[0];
    let seg = std::fs::read_to_string(ws.path(&format!("out/segments/{}.txt", v.video_id))).unwrap();
    assert_eq!(seg.lines().filter(|l| !l.starts_with('#') && !l.starts_with('t')).count(), v.frames());
}

#[test]
fn scope_override_is_recorded() {
    let ws = Workspace::new();
    for cmd in ["generate", "train", "segment"] {
        ws.ok(cmd, &[]);
    }
    ws.ok("eval", &["--scope", "video"]);
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ws.path("out/metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["scope"], "video");
    let effective: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ws.path("out/effective_config.json")).unwrap()).unwrap();
    assert_eq!(effective["command"], "eval");
    assert_eq!(effective["config"]["eval"]["scope"], "video");
}

#[test]
fn eval_without_checkpoint_is_a_config_error() {
    let ws = Workspace::new();
    ws.ok("generate", &[]);
    let out = ws.cad("eval", &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "config");
    assert!(err["message"].as_str().unwrap().contains("checkpoint"));
}

#[test]
fn bad_flags_and_configs_exit_two() {
    let ws = Workspace::new();
    let out = ws.cad("train", &["--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "usage");

    let out = ws.cad("segment", &["--eta", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "config");

    std::fs::write(ws.path("bad.json"), r#"{"train": {"epochz": 3}}"#).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_cad"))
        .args(["train", "--config"])
        .arg(ws.path("bad.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_json(&out)["message"].as_str().unwrap().contains("epochz"));
}

#[test]
fn help_exits_zero() {
    let out = Command::new(env!("CARGO_BIN_EXE_cad")).arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in ["generate", "train", "segment", "eval", "recognize"] {
        assert!(text.contains(cmd), "{cmd} not in help");
    }
}

fn labels_of(path: &Path) -> Vec<i64> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| l.chars().next().is_some_and(|c| c.is_ascii_digit()))
        .map(|l| l.split('\t').nth(1).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn no_decode_no_smooth_is_naive_argmax() {
    let ws = Workspace::new();
    for cmd in ["generate", "train"] {
        ws.ok(cmd, &[]);
    }
    ws.ok("segment", &["--no-decode", "--no-smooth", "--mode", "global"]);
    let corpus = read_corpus(&ws.path("data/manifest.json")).unwrap();
    let ck = load_checkpoint(&ws.path("out/model.cadc")).unwrap();
    for v in &corpus.videos {
        let a = model::affinity(&v.features, &ck.params).unwrap();
        let expected: Vec<i64> = naive_labels(&a).labels.iter().map(|&l| l as i64 + 1).collect();
        assert_eq!(labels_of(&ws.path(&format!("out/segments/{}.txt", v.video_id))), expected);
    }
}

#[test]
fn threads_do_not_change_the_checkpoint() {
    let ws = Workspace::new();
    ws.ok("generate", &[]);
    ws.ok("train", &[]);
    let single = std::fs::read(ws.path("out/model.cadc")).unwrap();
    ws.ok("train", &["--threads", "3"]);
    assert_eq!(std::fs::read(ws.path("out/model.cadc")).unwrap(), single);
}

#[test]
fn held_out_split_recognizes_only_test_videos() {
    let ws = Workspace::new();
    let mut cfg: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ws.path("run.json")).unwrap()).unwrap();
    cfg["data"] = serde_json::json!({ "test_fraction": 0.25, "split_seed": 1 });
    std::fs::write(ws.path("run.json"), cfg.to_string()).unwrap();
    ws.ok("generate", &[]);
    ws.ok("train", &[]);
    ws.ok("recognize", &["--held-out"]);
    let tsv = std::fs::read_to_string(ws.path("out/recognition.tsv")).unwrap();
    assert_eq!(tsv.lines().count(), 1 + 3);

    let out = ws.cad("recognize", &["--held-out", "--wp", "0", "--wg", "0"]);
    assert_eq!(out.status.code(), Some(2));
}
