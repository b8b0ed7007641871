//! One function per CLI subcommand. Each reads its keys from a [`FlatConfig`]
//! (file values with flag overrides applied), validates all of them before doing
//! any work, and writes its outputs under `out`.

use std::path::{Path, PathBuf};

use patclass_core::corpus::{split, PatentDocument, SplitManifest};
use patclass_core::dataset::resolve;
use patclass_core::metrics::EvalReport;
use patclass_core::model::{ClassifierModel, EmbeddingSource};
use patclass_core::synth::{generate_synthetic, SyntheticCorpusSpec};

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::config::{FlatConfig, KeyReader};
use crate::error::Result;
use crate::experiment::{run_experiment, write_outcome, ExperimentConfig, ExperimentOutcome};
use crate::ingest::{write_file, write_records};
use crate::manifest::{load_split, EnsembleManifest};
use crate::pipeline::{evaluate_ensemble, evaluate_model, load_documents, prep, read_model_config, resolve_table, train_embeddings, train_model, EmbeddingOptions, PrepSummary};
use crate::report::{render_report_csv, render_report_json};
use crate::wordvec::save_word_vectors;

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const HISTORY_FILE: &str = "history.json";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
pub const SYNTHETIC_FILE: &str = "synthetic.jsonl";
pub const VECTORS_FILE: &str = "skipgram.vec";

/// `corpus` (required) and `split` (optional; otherwise derived from `seed`).
struct DataKeys {
    corpus: Option<PathBuf>,
    split: Option<PathBuf>,
}

impl DataKeys {
    fn read(r: &mut KeyReader<'_>) -> Self {
        DataKeys {
            corpus: r.required("corpus"),
            split: r.optional("split"),
        }
    }

    fn load(self, seed: u64) -> Result<(Vec<PatentDocument>, SplitManifest)> {
        let docs = load_documents(&self.corpus.expect("checked by the key reader"))?;
        let manifest = match self.split {
            Some(p) => load_split(&p)?,
            None => split(&docs.iter().map(|d| d.doc_id.clone()).collect::<Vec<_>>(), seed)?,
        };
        Ok((docs, manifest))
    }
}

pub fn cmd_prep(config: &FlatConfig, seed: u64, out: &Path) -> Result<PrepSummary> {
    let mut r = config.reader();
    let corpus: Option<PathBuf> = r.required("corpus");
    r.finish()?;
    prep(&corpus.expect("checked by the key reader"), seed, out)
}

/// Writes a synthetic corpus as JSONL. Keys match [`SyntheticCorpusSpec`] fields.
pub fn cmd_synth(config: &FlatConfig, seed: u64, out: &Path) -> Result<PathBuf> {
    let mut r = config.reader();
    let spec = SyntheticCorpusSpec {
        num_docs: r.or("num_docs", 600),
        num_labels: r.or("num_labels", 6),
        filler_vocab: r.or("filler_vocab", 200),
        p_signal: r.or("p_signal", 1.0),
        min_words: r.or("min_words", 5),
        max_words: r.or("max_words", 15),
        seed,
    };
    if let Err(e) = spec.validate() {
        r.problem(e.to_string());
    }
    r.finish()?;
    let path = out.join(SYNTHETIC_FILE);
    write_records(&path, &generate_synthetic(&spec)?)?;
    Ok(path)
}

/// Trains skip-gram vectors on every section of the training split's documents.
pub fn cmd_train_embeddings(config: &FlatConfig, seed: u64, out: &Path) -> Result<PathBuf> {
    let mut r = config.reader();
    let data = DataKeys::read(&mut r);
    let options = EmbeddingOptions::read(&mut r, 300, seed);
    if let Err(e) = options.skipgram.validate() {
        r.problem(e.to_string());
    }
    r.finish()?;
    let (docs, manifest) = data.load(seed)?;
    let table = train_embeddings(&resolve(&docs, &manifest.train)?, &options.skipgram)?;
    let path = out.join(VECTORS_FILE);
    save_word_vectors(&path, &table)?;
    Ok(path)
}

/// Trains one classifier and writes its checkpoint and per-epoch history.
pub fn cmd_train(config: &FlatConfig, seed: u64, out: &Path) -> Result<ClassifierModel> {
    let mut r = config.reader();
    let data = DataKeys::read(&mut r);
    let model_config = read_model_config(&mut r, seed);
    let min_count = r.or("min_count", 1usize);
    let dim = model_config.as_ref().map_or(300, |c| c.embedding_dim);
    let options = EmbeddingOptions::read(&mut r, dim, seed);
    if let Some(EmbeddingSource::Pretrained(name)) = model_config.as_ref().map(|c| &c.embedding) {
        if let Err(e) = options.pretrained_path(name) {
            r.problem(e.to_string());
        }
    }
    r.finish()?;
    let model_config = model_config.expect("checked by the key reader");
    let (docs, manifest) = data.load(seed)?;
    let table = resolve_table(&model_config.embedding, &options, &resolve(&docs, &manifest.train)?)?;
    let (model, _) = train_model(&docs, &manifest, model_config, min_count, table.as_ref())?;
    save_checkpoint(&model, &out.join(CHECKPOINT_FILE))?;
    let mut history = serde_json::to_vec_pretty(model.history())?;
    history.push(b'\n');
    write_file(&out.join(HISTORY_FILE), &history)?;
    Ok(model)
}

fn write_report(report: &EvalReport, labels: &patclass_core::labels::LabelVocabulary, out: &Path) -> Result<()> {
    write_file(&out.join(REPORT_JSON), render_report_json(report, labels).as_bytes())?;
    write_file(&out.join(REPORT_CSV), render_report_csv(report).as_bytes())
}

/// Evaluates a checkpoint on the test split.
pub fn cmd_eval(config: &FlatConfig, seed: u64, out: &Path) -> Result<EvalReport> {
    let mut r = config.reader();
    let data = DataKeys::read(&mut r);
    let checkpoint: Option<PathBuf> = r.required("checkpoint");
    r.finish()?;
    let model = load_checkpoint(&checkpoint.expect("checked by the key reader"))?;
    let (docs, manifest) = data.load(seed)?;
    let report = evaluate_model(&model, &resolve(&docs, &manifest.test)?)?;
    write_report(&report, model.labels(), out)?;
    Ok(report)
}

/// Evaluates the three-member ensemble listed in `manifest` on the test split.
pub fn cmd_ensemble_eval(config: &FlatConfig, seed: u64, out: &Path) -> Result<EvalReport> {
    let mut r = config.reader();
    let data = DataKeys::read(&mut r);
    let manifest_path: Option<PathBuf> = r.required("manifest");
    r.finish()?;
    let manifest_path = manifest_path.expect("checked by the key reader");
    let ensemble = EnsembleManifest::load(&manifest_path)?.load_ensemble(&manifest_path)?;
    let (docs, split) = data.load(seed)?;
    let report = evaluate_ensemble(&ensemble, &resolve(&docs, &split.test)?)?;
    write_report(&report, ensemble.labels(), out)?;
    Ok(report)
}

pub fn cmd_experiment(config: &FlatConfig, seed: u64, out: &Path) -> Result<ExperimentOutcome> {
    let cfg = ExperimentConfig::from_config(config, seed)?;
    let outcome = run_experiment(&cfg)?;
    write_outcome(&cfg, &outcome, out)?;
    Ok(outcome)
}
