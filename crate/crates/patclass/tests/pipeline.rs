mod common;

use std::collections::BTreeSet;

use common::{fixture, tree_difference};
use patclass::checkpoint::{decode_checkpoint, encode_checkpoint, VERSION};
use patclass::config::FlatConfig;
use patclass::experiment::{run_experiment, ExperimentConfig, WORD_GRID};
use patclass::ingest::{parse_corpus, parse_jsonl, Format};
use patclass::pipeline::{load_documents, prep, train_model};
use patclass::Error;
use patclass_core::corpus::{filter_admitted, split, PoolKind};
use patclass_core::model::{Architecture, ModelConfig};
use patclass_core::textprep::FeatureSpec;

#[test]
fn five_doc_fixture_matches_the_goldens() {
    let dir = tempfile::tempdir().unwrap();
    let summary = prep(&fixture("five_docs.xml"), 7, dir.path()).unwrap();
    assert_eq!((summary.parsed, summary.admitted), (5, 3));
    assert_eq!(summary.manifest, None);
    assert_eq!(tree_difference(&fixture("five_docs"), dir.path()), None);
}

#[test]
fn twelve_doc_fixture_split_matches_the_golden() {
    let dir = tempfile::tempdir().unwrap();
    let summary = prep(&fixture("twelve_docs.jsonl"), 7, dir.path()).unwrap();
    let m = summary.manifest.unwrap();
    assert_eq!((m.train.len(), m.validation.len(), m.test.len()), (10, 1, 1));
    assert_eq!(tree_difference(&fixture("twelve_docs"), dir.path()), None);
}

#[test]
fn prep_is_byte_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    prep(&fixture("twelve_docs.jsonl"), 99, a.path()).unwrap();
    prep(&fixture("twelve_docs.jsonl"), 99, b.path()).unwrap();
    assert_eq!(tree_difference(a.path(), b.path()), None);
}

#[test]
fn admitted_set_drops_unlabelled_and_blank_section_documents() {
    let docs = load_documents(&fixture("five_docs.xml")).unwrap();
    let ids: Vec<&str> = docs.iter().map(|d| d.doc_id.as_str()).collect();
    assert_eq!(ids, ["EP-0001-A1", "EP-0003-B1", "EP-0005-A1"]);
    let labels: Vec<String> = docs.iter().map(|d| d.main_label.to_string()).collect();
    assert_eq!(labels, ["F16K", "H04L", "G06F"]);
}

#[test]
fn emitted_documents_reparse_to_equal_records() {
    let raw = parse_corpus(&fixture("five_docs.xml"), Format::Xml).unwrap();
    let emitted = std::fs::read_to_string(fixture("five_docs/documents.jsonl")).unwrap();
    assert_eq!(filter_admitted(&parse_jsonl(&emitted).unwrap()), filter_admitted(&raw));
    let per_section = std::fs::read_to_string(fixture("five_docs/pools/per_section.jsonl")).unwrap();
    assert_eq!(filter_admitted(&parse_jsonl(&per_section).unwrap()), filter_admitted(&raw));
}

#[test]
fn every_pool_holds_the_same_documents() {
    let ids = |kind: PoolKind| -> Vec<String> {
        std::fs::read_to_string(fixture(&format!("five_docs/pools/{}.jsonl", kind.name())))
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["doc_id"].as_str().unwrap().to_string())
            .collect()
    };
    for kind in PoolKind::ALL {
        assert_eq!(ids(kind), ids(PoolKind::AllSections), "{kind}");
    }
}

#[test]
fn exp1_produces_one_row_per_word_count_and_pool() {
    let config = FlatConfig::parse(
        "experiment = exp1
synthetic.num_docs = 40
synthetic.num_labels = 3
synthetic.min_words = 2
synthetic.max_words = 4
embeddings = random
embedding_dim = 4
conv_filters = 2
kernel_size = 2
dense_units = 4
epochs = 1
",
    )
    .unwrap();
    let cfg = ExperimentConfig::from_config(&config, 1).unwrap();
    let outcome = run_experiment(&cfg).unwrap();
    assert!(outcome.failures.is_empty(), "{:?}", outcome.failures);
    assert_eq!(outcome.rows.len(), WORD_GRID.len() * PoolKind::ALL.len());
    assert_eq!(outcome.rows.len(), cfg.expected_rows());
    let keys: BTreeSet<(usize, &str)> = outcome.rows.iter().map(|r| (r.key.words, r.key.pool.as_str())).collect();
    assert_eq!(keys.len(), outcome.rows.len());
}

#[test]
fn experiment_config_reports_every_problem() {
    let config = FlatConfig::parse("experiment = exp9\nwords = 20,x\nembeddings = fasttext\nbatch_size = 0\n").unwrap();
    let Err(Error::Config(problems)) = ExperimentConfig::from_config(&config, 0) else {
        panic!("expected a config error");
    };
    let all = problems.join("\n");
    for needle in ["exp9", "words", "corpus", "pretrained.fasttext", "batch_size"] {
        assert!(all.contains(needle), "{needle} missing from {all}");
    }
}

fn tiny_model() -> patclass_core::model::ClassifierModel {
    let docs = load_documents(&fixture("twelve_docs.jsonl")).unwrap();
    let ids: Vec<String> = docs.iter().map(|d| d.doc_id.clone()).collect();
    let config = ModelConfig {
        embedding_dim: 4,
        hidden_size: 3,
        epochs: 1,
        batch_size: 4,
        ..ModelConfig::new(Architecture::Gru, PoolKind::Claims, FeatureSpec::FirstX(4))
    };
    train_model(&docs, &split(&ids, 1).unwrap(), config, 1, None).unwrap().0
}

#[test]
fn corrupted_checkpoints_are_rejected() {
    let bytes = encode_checkpoint(&tiny_model()).unwrap();
    assert!(decode_checkpoint(&bytes).is_ok());

    let mut magic = bytes.clone();
    magic[0] = b'X';
    assert!(decode_checkpoint(&magic).unwrap_err().to_string().contains("magic"));

    let mut version = bytes.clone();
    version[4..8].copy_from_slice(&(VERSION + 1).to_le_bytes());
    assert!(decode_checkpoint(&version).unwrap_err().to_string().contains("version"));

    for cut in [3, 10, 20, bytes.len() - 1] {
        assert!(decode_checkpoint(&bytes[..cut]).is_err(), "truncated at {cut}");
    }
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(decode_checkpoint(&extra).is_err());
}
