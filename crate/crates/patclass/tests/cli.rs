//! Drives the `patclass` binary end to end on the committed fixtures.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn patclass(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_patclass")).args(args).output().expect("binary runs")
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

const TINY_CNN: &str = "architecture = cnn
pool = all_sections
words = 8
embedding_dim = 8
conv_filters = 4
kernel_size = 2
dense_units = 8
epochs = 2
batch_size = 4
";

#[test]
fn train_then_eval_writes_a_report_with_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = format!("corpus={}", fixture("twelve_docs.jsonl").display());
    let split = format!("split={}", fixture("twelve_docs/split.json").display());
    let config = dir.path().join("train.conf");
    std::fs::write(&config, TINY_CNN).unwrap();
    let run = patclass(&["train", "--config", config.to_str().unwrap(), "--set", &corpus, "--set", &split, "--out", &out_arg(dir.path())]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(dir.path().join("model.ckpt").exists() && dir.path().join("history.json").exists());

    let ckpt = format!("checkpoint={}", dir.path().join("model.ckpt").display());
    let run = patclass(&["eval", "--set", &corpus, "--set", &split, "--set", &ckpt, "--out", &out_arg(dir.path())]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["num_docs"], 1);
    assert!(report["accuracy"]["percent"].is_string() || report["accuracy"]["percent"].is_number());
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(csv.starts_with("metric,numerator,denominator,percent\naccuracy,"));
}

#[test]
fn ensemble_of_one_checkpoint_matches_the_member() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = format!("corpus={}", fixture("twelve_docs.jsonl").display());
    let config = dir.path().join("train.conf");
    std::fs::write(&config, TINY_CNN.replace("all_sections", "claims")).unwrap();
    let out = out_arg(dir.path());
    assert!(patclass(&["train", "--config", config.to_str().unwrap(), "--set", &corpus, "--seed", "3", "--out", &out]).status.success());
    std::fs::write(
        dir.path().join("ensemble.json"),
        r#"{"members": [
            {"section": "claims", "feature": {"mode": "first_x", "words": 8}, "checkpoint": "model.ckpt"},
            {"section": "claims", "feature": {"mode": "first_x", "words": 8}, "checkpoint": "model.ckpt"},
            {"section": "claims", "feature": {"mode": "first_x", "words": 8}, "checkpoint": "model.ckpt"}
        ]}"#,
    )
    .unwrap();
    let ckpt = format!("checkpoint={}", dir.path().join("model.ckpt").display());
    assert!(patclass(&["eval", "--set", &corpus, "--set", &ckpt, "--seed", "3", "--out", &out]).status.success());
    let member = std::fs::read(dir.path().join("report.json")).unwrap();
    let manifest = format!("manifest={}", dir.path().join("ensemble.json").display());
    let run = patclass(&["ensemble-eval", "--set", &corpus, "--set", &manifest, "--seed", "3", "--out", &out]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(std::fs::read(dir.path().join("report.json")).unwrap(), member);
}

#[test]
fn mismatched_member_feature_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = format!("corpus={}", fixture("twelve_docs.jsonl").display());
    let config = dir.path().join("train.conf");
    std::fs::write(&config, TINY_CNN.replace("all_sections", "claims")).unwrap();
    let out = out_arg(dir.path());
    assert!(patclass(&["train", "--config", config.to_str().unwrap(), "--set", &corpus, "--out", &out]).status.success());
    let member = |words: usize| format!(r#"{{"section": "claims", "feature": {{"mode": "first_x", "words": {words}}}, "checkpoint": "model.ckpt"}}"#);
    std::fs::write(dir.path().join("ensemble.json"), format!(r#"{{"members": [{}, {}, {}]}}"#, member(8), member(9), member(8))).unwrap();
    let manifest = format!("manifest={}", dir.path().join("ensemble.json").display());
    let run = patclass(&["ensemble-eval", "--set", &corpus, "--set", &manifest, "--out", &out]);
    assert!(!run.status.success());
    assert!(String::from_utf8_lossy(&run.stderr).contains("listed with the first 9 words"));
}

#[test]
fn missing_keys_are_all_named_and_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let run = patclass(&["train", "--set", "epochs=two", "--set", "colour=blue", "--out", &out_arg(dir.path())]);
    assert!(!run.status.success());
    let err = String::from_utf8_lossy(&run.stderr);
    for needle in ["\"corpus\"", "\"architecture\"", "epochs", "colour"] {
        assert!(err.contains(needle), "{needle} missing from {err}");
    }
    assert!(!dir.path().join("model.ckpt").exists());
}

#[test]
fn unreadable_corpus_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let run = patclass(&["prep", "--set", "corpus=/nonexistent/corpus.xml", "--out", &out_arg(dir.path())]);
    assert!(!run.status.success());
    assert!(String::from_utf8_lossy(&run.stderr).contains("/nonexistent/corpus.xml"));
}

#[test]
fn malformed_xml_reports_the_byte_offset() {
    let dir = tempfile::tempdir().unwrap();
    let path = fixture("malformed.xml");
    let bad_tag = std::fs::read_to_string(&path).unwrap().find("</patent-docment>").unwrap();
    let run = patclass(&["prep", "--set", &format!("corpus={}", path.display()), "--out", &out_arg(dir.path())]);
    assert!(!run.status.success());
    assert!(String::from_utf8_lossy(&run.stderr).contains(&format!("at byte {bad_tag}")));
}
