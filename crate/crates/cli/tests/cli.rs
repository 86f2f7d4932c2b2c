use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn toy() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/data/toy_corpus.jsonl")
}

fn meetsum(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_meetsum")).args(args).env_remove("DD_SEED").output().expect("binary runs")
}

fn run_ok(args: &[&str]) -> Output {
    let out = meetsum(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn lines(path: &Path) -> Vec<Value> {
    fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn validate_accepts_toy_corpus() {
    let out = run_ok(&["validate", s(&toy())]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("3 meetings"));
}

#[test]
fn validate_reports_corrupted_line() {
    let dir = TempDir::new().unwrap();
    let text = fs::read_to_string(toy()).unwrap();
    let mut rows: Vec<&str> = text.lines().collect();
    rows[1] = "{\"id\": \"broken\", \"das\": [";
    let bad = dir.path().join("bad.jsonl");
    fs::write(&bad, rows.join("\n")).unwrap();
    let out = meetsum(&["validate", s(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn validate_rejects_empty_file() {
    let dir = TempDir::new().unwrap();
    let empty = dir.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    assert_eq!(meetsum(&["validate", s(&empty)]).status.code(), Some(1));
}

#[test]
fn bad_arguments_exit_one() {
    assert_eq!(meetsum(&["cluster", "--corpus", s(&toy()), "--method", "kmeans"]).status.code(), Some(1));
    assert_eq!(meetsum(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(meetsum(&["--seed", "x", "validate", s(&toy())]).status.code(), Some(1));
    let out = Command::new(env!("CARGO_BIN_EXE_meetsum"))
        .args(["validate", s(&toy())])
        .env("DD_SEED", "nope")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn all_in_one_has_full_recall() {
    let report = json(&run_ok(&["cluster", "--corpus", s(&toy()), "--method", "all-in-one"]));
    assert_eq!(report["bcubed"]["recall"], 1.0);
    assert_eq!(report["pairwise"]["recall"], 1.0);
}

#[test]
fn tfidf_uses_default_threshold() {
    let report = json(&run_ok(&["cluster", "--corpus", s(&toy()), "--method", "tfidf"]));
    assert_eq!(report["threshold"], 0.035);
}

#[test]
fn lda_clustering_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let out = run_ok(&["--seed", "7", "cluster", "--corpus", s(&toy()), "--method", "lda", "--out", s(&path)]);
        (out.stdout, fs::read(path).unwrap())
    };
    assert_eq!(run("a.jsonl"), run("b.jsonl"));
}

#[test]
fn seed_flag_beats_environment() {
    let corpus = toy();
    let args = ["cluster", "--corpus", s(&corpus), "--method", "lda", "--xval"];
    let with_flag = |env: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_meetsum"))
            .args(["--seed", "3"])
            .args(args)
            .env("DD_SEED", env)
            .output()
            .unwrap();
        assert!(out.status.success());
        out.stdout
    };
    assert_eq!(with_flag("1"), with_flag("2"));
    let env_only = Command::new(env!("CARGO_BIN_EXE_meetsum")).args(args).env("DD_SEED", "3").output().unwrap();
    assert_eq!(env_only.stdout, with_flag("9"));
}

#[test]
fn supervised_clustering_needs_a_model() {
    let out = meetsum(&["cluster", "--corpus", s(&toy()), "--method", "pairwise-svm"]);
    assert_eq!(out.status.code(), Some(1));
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.json");
    let out = meetsum(&["cluster", "--corpus", s(&toy()), "--method", "pairwise-svm", "--model", s(&missing)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn trained_pairwise_model_clusters() {
    let dir = TempDir::new().unwrap();
    let model = dir.path().join("pairwise.json");
    run_ok(&["train-pairwise", "--corpus", s(&toy()), "--learner", "maxent", "--out", s(&model)]);
    let report =
        json(&run_ok(&["cluster", "--corpus", s(&toy()), "--method", "pairwise-maxent", "--model", s(&model)]));
    assert_eq!(report["threshold"], 0.45);
    assert!(report["bcubed"]["f1"].as_f64().unwrap() > 0.0);
    // A pairwise model cannot drive DA extraction.
    let out = meetsum(&["summarize", "--corpus", s(&toy()), "--summarizer", "da", "--model", s(&model)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn upper_bound_has_full_precision() {
    let report = json(&run_ok(&["summarize", "--corpus", s(&toy()), "--summarizer", "upper-bound", "--stem-match"]));
    assert_eq!(report["rouge"]["precision"], 1.0);
}

#[test]
fn longest_on_worked_example_cluster() {
    let dir = TempDir::new().unwrap();
    let clusters = dir.path().join("clusters.jsonl");
    run_ok(&["cluster", "--corpus", s(&toy()), "--method", "all-in-one", "--out", s(&clusters)]);
    let mut records = lines(&clusters);
    for r in &mut records {
        if r["meeting_id"] == "toy-m2" {
            r["clusters"] = serde_json::json!([
                ["toy-m2.da02", "toy-m2.da03", "toy-m2.da06", "toy-m2.da08"],
                ["toy-m2.da09", "toy-m2.da11"]
            ]);
        }
    }
    let text: String = records.iter().map(|r| r.to_string() + "\n").collect();
    fs::write(&clusters, text).unwrap();

    let out = dir.path().join("summaries.jsonl");
    run_ok(&[
        "summarize",
        "--corpus",
        s(&toy()),
        "--clusters",
        s(&clusters),
        "--summarizer",
        "longest",
        "--out",
        s(&out),
    ]);
    let summaries = lines(&out);
    let m2a = summaries.iter().find(|o| o["meeting_id"] == "toy-m2" && o["decision_id"] == "a").unwrap();
    assert_eq!(m2a["text"], "talked about personal face plates in meeting");
}

#[test]
fn zero_context_matches_no_context() {
    let dir = TempDir::new().unwrap();
    let model = dir.path().join("token.json");
    run_ok(&["train-token", "--corpus", s(&toy()), "--context", "0", "--out", s(&model)]);
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    let corpus = toy();
    let base = ["summarize", "--corpus", s(&corpus), "--summarizer", "token", "--model", s(&model)];
    let r1 = run_ok(&[&base[..], &["--out", s(&a)]].concat());
    let r2 = run_ok(&[&base[..], &["--context", "0", "--out", s(&b)]].concat());
    assert_eq!(r1.stdout, r2.stdout);
    assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
}

#[test]
fn xval_folds_do_not_leak() {
    let report = json(&run_ok(&["--seed", "3", "xval", "--corpus", s(&toy())]));
    let folds = report["folds"].as_array().unwrap();
    assert_eq!(folds.len(), 3);
    for f in folds {
        for t in f["test"].as_array().unwrap() {
            assert!(!f["train"].as_array().unwrap().contains(t));
        }
    }
}

#[test]
fn xval_needs_enough_meetings() {
    let out = meetsum(&["xval", "--corpus", s(&toy()), "--folds", "4"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_file_and_flags() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("config.json");
    fs::write(&config, r#"{"thresholds": {"tfidf": 0.5}, "voi_base": "2"}"#).unwrap();
    let report = json(&run_ok(&["--config", s(&config), "cluster", "--corpus", s(&toy()), "--method", "tfidf"]));
    assert_eq!(report["threshold"], 0.5);
    let natural = json(&run_ok(&["cluster", "--corpus", s(&toy()), "--method", "all-in-one"]));
    let two = json(&run_ok(&["--config", s(&config), "cluster", "--corpus", s(&toy()), "--method", "all-in-one"]));
    let ratio = natural["voi"].as_f64().unwrap() / two["voi"].as_f64().unwrap();
    assert!((ratio - 2f64.ln()).abs() < 1e-5);
    let flagged = json(&run_ok(&[
        "--config",
        s(&config),
        "--voi-base",
        "e",
        "cluster",
        "--corpus",
        s(&toy()),
        "--method",
        "all-in-one",
    ]));
    assert_eq!(flagged["voi"], natural["voi"]);
    fs::write(&config, r#"{"thresholds": {"tfidf": 0.5}, "colour": "red"}"#).unwrap();
    assert_eq!(meetsum(&["--config", s(&config), "validate", s(&toy())]).status.code(), Some(1));
}

#[test]
fn text_report_renders_tables() {
    let out = run_ok(&["--seed", "7", "xval", "--corpus", s(&toy()), "--format", "text"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("Clustering (3 folds, seed 7)"));
    assert!(text.contains("upper-bound"));
}
