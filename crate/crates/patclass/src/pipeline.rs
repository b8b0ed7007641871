//! Composition of the core modules into the steps the CLI and experiments run.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use patclass_core::corpus::{build_pools, filter_admitted, section_stats, split, PatentDocument, PoolKind, PoolText, Section, SplitManifest};
use patclass_core::dataset::{prepare, PreparedData};
use patclass_core::embeddings::{assemble_matrix, train_skipgram, EmbeddingMatrix, EmbeddingTable, SkipGramConfig};
use patclass_core::ensemble::{rank_member, EnsembleModel, PredictionRanking};
use patclass_core::metrics::{EvalReport, GoldLabels};
use patclass_core::model::{Architecture, ClassifierModel, EmbeddingSource, ModelConfig};
use patclass_core::seed;
use patclass_core::textprep::{encode, select_words, tokenize, FeatureSpec};
use serde::Serialize;

use crate::config::KeyReader;
use crate::error::{Error, Result};
use crate::ingest::{parse_corpus, write_documents, write_file, write_jsonl, Format};
use crate::manifest::{save_split, SPLIT_FILE};
use crate::wordvec::load_pretrained;

pub const DOCUMENTS_FILE: &str = "documents.jsonl";
pub const STATS_FILE: &str = "stats.csv";

/// Reads a corpus in either format and keeps the admitted documents.
pub fn load_documents(path: &Path) -> Result<Vec<PatentDocument>> {
    Ok(filter_admitted(&parse_corpus(path, Format::from_path(path))?))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrepSummary {
    pub parsed: usize,
    pub admitted: usize,
    /// Absent when too few documents were admitted to split.
    pub manifest: Option<SplitManifest>,
}

#[derive(Serialize)]
struct PoolLine<'a> {
    doc_id: &'a str,
    text: &'a str,
    main_label: String,
}

/// Stats table: one row per section with min, max and the mean to two decimals.
pub fn render_stats(docs: &[PatentDocument]) -> String {
    let stats = section_stats(docs);
    let mut out = String::from("section,min,max,mean\n");
    for s in Section::ALL {
        let w = stats.get(s);
        let mean = patclass_core::metrics::round_hundredths(num_rational::Ratio::new(
            *w.mean.numer() as i128,
            *w.mean.denom() as i128,
        ));
        writeln!(out, "{},{},{},{}.{:02}", s.name(), w.min, w.max, mean / 100, mean % 100).expect("write to String");
    }
    out
}

/// Parses, filters, builds every pool, splits and writes the statistics table.
/// Output is byte-identical for the same input and seed. With fewer than ten
/// admitted documents no split is written.
pub fn prep(corpus: &Path, seed: u64, out: &Path) -> Result<PrepSummary> {
    let records = parse_corpus(corpus, Format::from_path(corpus))?;
    let docs = filter_admitted(&records);
    write_documents(&out.join(DOCUMENTS_FILE), &docs)?;
    for (kind, pool) in build_pools(&docs) {
        let path = out.join("pools").join(format!("{}.jsonl", kind.name()));
        if kind == PoolKind::PerSection {
            let per: Vec<&PatentDocument> = pool
                .entries
                .iter()
                .map(|e| docs.iter().find(|d| d.doc_id == e.doc_id).expect("pool built from docs"))
                .collect();
            write_documents(&path, &per.into_iter().cloned().collect::<Vec<_>>())?;
            continue;
        }
        write_jsonl(
            &path,
            pool.entries.iter().map(|e| PoolLine {
                doc_id: &e.doc_id,
                text: match &e.text {
                    PoolText::Single(t) => t,
                    PoolText::Sections(_) => unreachable!("only the per-section pool holds triples"),
                },
                main_label: e.main_label.to_string(),
            }),
        )?;
    }
    let ids: Vec<String> = docs.iter().map(|d| d.doc_id.clone()).collect();
    write_file(&out.join(STATS_FILE), render_stats(&docs).as_bytes())?;
    let manifest = match split(&ids, seed) {
        Ok(m) => {
            save_split(&out.join(SPLIT_FILE), &m)?;
            Some(m)
        }
        Err(patclass_core::Error::TooFewDocuments(_)) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(PrepSummary {
        parsed: records.len(),
        admitted: docs.len(),
        manifest,
    })
}

/// Paths of pretrained word-vector files by name, plus skip-gram settings.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingOptions {
    pub pretrained: BTreeMap<String, PathBuf>,
    pub skipgram: SkipGramConfig,
}

impl EmbeddingOptions {
    /// Keys `pretrained.<name> = path` and `skipgram.<field>`. The skip-gram seed
    /// always derives from `seed`.
    pub fn read(r: &mut KeyReader<'_>, default_dim: usize, seed: u64) -> Self {
        let pretrained = r
            .prefixed("pretrained.")
            .into_iter()
            .map(|(k, v)| (k, PathBuf::from(v)))
            .collect();
        let d = SkipGramConfig::default();
        let skipgram = SkipGramConfig {
            dim: r.or("skipgram.dim", default_dim),
            window: r.or("skipgram.window", d.window),
            epochs: r.or("skipgram.epochs", d.epochs),
            negative_samples: r.or("skipgram.negative_samples", d.negative_samples),
            learning_rate: r.or("skipgram.learning_rate", d.learning_rate),
            min_learning_rate: r.or("skipgram.min_learning_rate", d.min_learning_rate),
            min_count: r.or("skipgram.min_count", d.min_count),
            seed: seed::derive(seed, "skipgram"),
        };
        EmbeddingOptions { pretrained, skipgram }
    }

    pub fn pretrained_path(&self, name: &str) -> Result<&Path> {
        self.pretrained
            .get(name)
            .map(PathBuf::as_path)
            .ok_or_else(|| Error::Config(vec![format!("no path for pretrained embedding {name:?} (set pretrained.{name})")]))
    }
}

/// Token stream for skip-gram training: every section of every training document.
pub fn skipgram_stream(docs: &[&PatentDocument]) -> Vec<Vec<String>> {
    docs.iter().map(|d| tokenize(&d.all_sections())).collect()
}

pub fn train_embeddings(docs: &[&PatentDocument], config: &SkipGramConfig) -> Result<EmbeddingTable> {
    Ok(train_skipgram(&skipgram_stream(docs), config)?.0)
}

/// The table behind a non-random source. Skip-gram tables are trained on `train_docs`.
pub fn resolve_table(
    source: &EmbeddingSource,
    options: &EmbeddingOptions,
    train_docs: &[&PatentDocument],
) -> Result<Option<EmbeddingTable>> {
    Ok(match source {
        EmbeddingSource::Random => None,
        EmbeddingSource::Skipgram => Some(train_embeddings(train_docs, &options.skipgram)?),
        EmbeddingSource::Pretrained(name) => Some(load_pretrained(options.pretrained_path(name)?)?),
    })
}

/// Builds and trains one classifier on the manifest's training split.
pub fn train_model(
    docs: &[PatentDocument],
    manifest: &SplitManifest,
    mut config: ModelConfig,
    min_count: usize,
    table: Option<&EmbeddingTable>,
) -> Result<(ClassifierModel, PreparedData)> {
    config.validate()?;
    let data = prepare(docs, manifest, config.pool, config.feature, min_count)?;
    let matrix: Option<EmbeddingMatrix> = match table {
        Some(table) => {
            config.embedding_dim = table.dim();
            Some(assemble_matrix(&data.vocab, table, seed::derive(config.seed, "unknown-row")))
        }
        None => None,
    };
    let mut model = ClassifierModel::build(config, data.vocab.clone(), data.labels.clone(), matrix)?;
    model.train(&data.train, &data.validation)?;
    Ok((model, data))
}

pub fn gold_labels(model_labels: &patclass_core::labels::LabelVocabulary, docs: &[&PatentDocument]) -> Result<GoldLabels> {
    docs.iter()
        .map(|d| Ok((d.doc_id.clone(), model_labels.index_of(d.main_label)?)))
        .collect()
}

/// Rankings of one standalone classifier over `docs`.
pub fn rank_with_model(model: &ClassifierModel, docs: &[&PatentDocument]) -> Result<Vec<PredictionRanking>> {
    let cfg = model.config();
    let seqs = docs
        .iter()
        .map(|d| Ok(encode(&d.doc_id, &select_words(d, cfg.pool, cfg.feature)?, model.vocabulary(), cfg.sequence_length())))
        .collect::<Result<Vec<_>>>()?;
    let probs = model.predict_proba(&seqs)?;
    Ok(docs.iter().zip(&probs).map(|(d, p)| rank_member(&d.doc_id, p)).collect())
}

pub fn evaluate_model(model: &ClassifierModel, docs: &[&PatentDocument]) -> Result<EvalReport> {
    let rankings = rank_with_model(model, docs)?;
    Ok(EvalReport::compute(&rankings, &gold_labels(model.labels(), docs)?, &EvalReport::DEFAULT_CUTOFFS)?)
}

pub fn evaluate_ensemble(ensemble: &EnsembleModel, docs: &[&PatentDocument]) -> Result<EvalReport> {
    let owned: Vec<PatentDocument> = docs.iter().map(|d| (*d).clone()).collect();
    let rankings = ensemble.predict_batch(&owned)?;
    Ok(EvalReport::compute(&rankings, &gold_labels(ensemble.labels(), docs)?, &EvalReport::DEFAULT_CUTOFFS)?)
}

/// Model settings from flat keys. `architecture` is required; the epoch default
/// follows the architecture and pretrained or skip-gram tables are frozen unless
/// `trainable_embeddings` says otherwise.
pub fn read_model_config(r: &mut KeyReader<'_>, seed: u64) -> Option<ModelConfig> {
    let architecture: Option<Architecture> = r.required("architecture");
    let pool: PoolKind = r.or("pool", PoolKind::AllSections);
    let words: usize = r.or("words", 60);
    let arch = architecture.unwrap_or(Architecture::Cnn);
    let mut c = ModelConfig::new(arch, pool, FeatureSpec::for_pool(pool, words));
    c.embedding = r.or("embedding", EmbeddingSource::Random);
    c.trainable_embeddings = r.or("trainable_embeddings", c.embedding == EmbeddingSource::Random);
    apply_model_keys(r, &mut c, seed);
    architecture.map(|_| c)
}

/// Hyperparameter keys shared by training and experiments.
pub fn apply_model_keys(r: &mut KeyReader<'_>, c: &mut ModelConfig, seed: u64) {
    c.embedding_dim = r.or("embedding_dim", c.embedding_dim);
    c.batch_size = r.or("batch_size", c.batch_size);
    if let Some(e) = r.optional("epochs") {
        c.epochs = e;
    }
    c.optimizer.learning_rate = r.or("learning_rate", c.optimizer.learning_rate);
    c.optimizer.beta1 = r.or("beta1", c.optimizer.beta1);
    c.optimizer.beta2 = r.or("beta2", c.optimizer.beta2);
    c.optimizer.epsilon = r.or("epsilon", c.optimizer.epsilon);
    c.conv_filters = r.or("conv_filters", c.conv_filters);
    c.kernel_size = r.or("kernel_size", c.kernel_size);
    c.dense_units = r.or("dense_units", c.dense_units);
    c.dropout = r.or("dropout", c.dropout);
    c.spatial_dropout = r.or("spatial_dropout", c.spatial_dropout);
    c.hidden_size = r.or("hidden_size", c.hidden_size);
    c.seed = seed;
    if let Err(e) = c.validate() {
        r.problem(e.to_string());
    }
}
