//! The four experiment grids: word counts by pool, embedding sources,
//! architectures, and section ensembles against their members.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use patclass_core::corpus::{filter_admitted, split, PatentDocument, PoolKind, Section, SplitManifest};
use patclass_core::dataset::resolve;
use patclass_core::embeddings::EmbeddingTable;
use patclass_core::ensemble::EnsembleModel;
use patclass_core::metrics::{percent_2dp_u64, EvalReport, ImprovementRow};
use patclass_core::model::{Architecture, ClassifierModel, EmbeddingSource, History, ModelConfig};
use patclass_core::seed;
use patclass_core::synth::{generate_synthetic, SyntheticCorpusSpec};
use patclass_core::textprep::FeatureSpec;
use rayon::prelude::*;

use crate::config::{FlatConfig, KeyReader};
use crate::error::{Error, Result};
use crate::ingest::write_file;
use crate::manifest::load_split;
use crate::pipeline::{apply_model_keys, evaluate_ensemble, evaluate_model, load_documents, resolve_table, train_model, EmbeddingOptions};
use crate::report::IMPROVEMENT_HEADER;

pub const RESULTS_FILE: &str = "results.csv";
pub const IMPROVEMENT_FILE: &str = "improvement.csv";
pub const HISTORY_FILE: &str = "history.csv";
pub const RESULTS_HEADER: &str = "experiment,pool,words,architecture,embedding,seed,accuracy,r_at_3,r_at_5,r_at_10";

pub const WORD_GRID: [usize; 8] = [20, 40, 60, 80, 100, 200, 300, 400];
const MONO_POOLS: [PoolKind; 4] = [PoolKind::TitleAbstract, PoolKind::Description, PoolKind::Claims, PoolKind::AllSections];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ExperimentId {
    /// Word count against pool, CNN only.
    Exp1,
    /// Embedding sources.
    Exp2,
    /// Architectures.
    Exp3,
    /// Section ensembles against their members.
    Exp4,
}

impl ExperimentId {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::Exp1 => "exp1",
            ExperimentId::Exp2 => "exp2",
            ExperimentId::Exp3 => "exp3",
            ExperimentId::Exp4 => "exp4",
        }
    }
}

impl FromStr for ExperimentId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "exp1" => ExperimentId::Exp1,
            "exp2" => ExperimentId::Exp2,
            "exp3" => ExperimentId::Exp3,
            "exp4" => ExperimentId::Exp4,
            _ => return Err(format!("expected exp1, exp2, exp3 or exp4, got {s:?}")),
        })
    }
}

/// Where documents come from: a corpus file, or a synthetic corpus regenerated per seed.
#[derive(Debug, Clone)]
pub enum CorpusSource {
    File { path: PathBuf, split: Option<PathBuf> },
    Synthetic(SyntheticCorpusSpec),
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    pub corpus: CorpusSource,
    pub seeds: Vec<u64>,
    pub words: Vec<usize>,
    /// Ignored by exp4, whose members always read the three sections.
    pub pools: Vec<PoolKind>,
    pub architectures: Vec<Architecture>,
    pub embeddings: Vec<EmbeddingSource>,
    pub min_count: usize,
    pub embedding_options: EmbeddingOptions,
    /// Hyperparameters shared by every grid point. Architecture, pool, feature,
    /// embedding and seed are overwritten per point; epochs follow the
    /// architecture unless `epochs_override` is set.
    pub template: ModelConfig,
    pub epochs_override: Option<usize>,
    /// Unset means random tables train and pretrained or skip-gram tables stay frozen.
    pub trainable_override: Option<bool>,
    pub write_history: bool,
}

fn fasttext() -> EmbeddingSource {
    EmbeddingSource::Pretrained("fasttext".into())
}

impl ExperimentConfig {
    /// Reads every key, then reports all problems together.
    pub fn from_config(config: &FlatConfig, root_seed: u64) -> Result<Self> {
        let mut r = config.reader();
        let experiment: Option<ExperimentId> = r.required("experiment");
        let id = experiment.unwrap_or(ExperimentId::Exp1);
        let corpus = read_corpus(&mut r, root_seed);
        let seeds = r.list("seeds", vec![root_seed]);
        let (words, pools, architectures, embeddings) = match id {
            ExperimentId::Exp1 => (WORD_GRID.to_vec(), PoolKind::ALL.to_vec(), vec![Architecture::Cnn], vec![fasttext()]),
            ExperimentId::Exp2 => (
                vec![60],
                MONO_POOLS.to_vec(),
                vec![Architecture::Cnn],
                vec![
                    fasttext(),
                    EmbeddingSource::Pretrained("word2vec".into()),
                    EmbeddingSource::Pretrained("glove".into()),
                    EmbeddingSource::Skipgram,
                ],
            ),
            ExperimentId::Exp3 => (vec![60], MONO_POOLS.to_vec(), Architecture::ALL.to_vec(), vec![fasttext()]),
            ExperimentId::Exp4 => (vec![60], Vec::new(), Architecture::ALL.to_vec(), vec![fasttext()]),
        };
        let words = r.list("words", words);
        let pools = if id == ExperimentId::Exp4 { pools } else { r.list("pools", pools) };
        let architectures = r.list("architectures", architectures);
        let embeddings = r.list("embeddings", embeddings);
        let min_count = r.or("min_count", 1usize);
        let mut template = ModelConfig::new(Architecture::Cnn, PoolKind::AllSections, FeatureSpec::FirstX(60));
        let epochs_override = r.optional("epochs");
        let trainable_override = r.optional("trainable_embeddings");
        apply_model_keys(&mut r, &mut template, root_seed);
        let embedding_options = EmbeddingOptions::read(&mut r, template.embedding_dim, root_seed);
        let write_history = r.or("history", false);
        for e in &embeddings {
            if let EmbeddingSource::Pretrained(name) = e {
                match embedding_options.pretrained.get(name) {
                    None => r.problem(format!("embedding {name:?} needs a path: set pretrained.{name}")),
                    Some(p) if !p.exists() => r.problem(format!("pretrained.{name}: {} does not exist", p.display())),
                    Some(_) => {}
                }
            }
        }
        if let Some(CorpusSource::File { path, split }) = &corpus {
            for p in std::iter::once(path).chain(split) {
                if !p.exists() {
                    r.problem(format!("{} does not exist", p.display()));
                }
            }
        }
        r.finish()?;
        Ok(ExperimentConfig {
            experiment: id,
            corpus: corpus.expect("a missing corpus is reported by finish"),
            seeds,
            words,
            pools,
            architectures,
            embeddings,
            min_count,
            embedding_options,
            template,
            epochs_override,
            trainable_override,
            write_history,
        })
    }

    fn model_config(&self, architecture: Architecture, pool: PoolKind, words: usize, embedding: &EmbeddingSource, seed: u64) -> ModelConfig {
        let mut c = self.template.clone();
        c.architecture = architecture;
        c.pool = pool;
        c.feature = FeatureSpec::for_pool(pool, words);
        c.embedding = embedding.clone();
        c.trainable_embeddings = self.trainable_override.unwrap_or(*embedding == EmbeddingSource::Random);
        c.epochs = self.epochs_override.unwrap_or(architecture.default_epochs());
        c.seed = seed;
        c
    }

    /// Number of result rows a fully successful run produces.
    pub fn expected_rows(&self) -> usize {
        let per_seed = self.words.len() * self.architectures.len() * self.embeddings.len();
        let per_point = match self.experiment {
            ExperimentId::Exp4 => 4,
            _ => self.pools.len(),
        };
        self.seeds.len() * per_seed * per_point
    }
}

fn read_corpus(r: &mut KeyReader<'_>, root_seed: u64) -> Option<CorpusSource> {
    let path: Option<PathBuf> = r.optional("corpus");
    let split: Option<PathBuf> = r.optional("split");
    let synth = r.prefixed("synthetic.");
    match (path, synth.is_empty()) {
        (Some(path), true) => Some(CorpusSource::File { path, split }),
        (None, false) => {
            let mut spec = SyntheticCorpusSpec {
                num_docs: 600,
                num_labels: 6,
                filler_vocab: 200,
                p_signal: 1.0,
                min_words: 5,
                max_words: 15,
                seed: root_seed,
            };
            for (k, v) in &synth {
                let bad = |r: &mut KeyReader<'_>| r.problem(format!("synthetic.{k}: cannot parse {v:?}"));
                let ok = match k.as_str() {
                    "num_docs" => v.parse().map(|x| spec.num_docs = x).is_ok(),
                    "num_labels" => v.parse().map(|x| spec.num_labels = x).is_ok(),
                    "filler_vocab" => v.parse().map(|x| spec.filler_vocab = x).is_ok(),
                    "p_signal" => v.parse().map(|x| spec.p_signal = x).is_ok(),
                    "min_words" => v.parse().map(|x| spec.min_words = x).is_ok(),
                    "max_words" => v.parse().map(|x| spec.max_words = x).is_ok(),
                    _ => {
                        r.problem(format!("unknown key \"synthetic.{k}\""));
                        true
                    }
                };
                if !ok {
                    bad(r);
                }
            }
            if split.is_some() {
                r.problem("split cannot be combined with a synthetic corpus");
            }
            if let Err(e) = spec.validate() {
                r.problem(e.to_string());
            }
            Some(CorpusSource::Synthetic(spec))
        }
        (Some(_), false) => {
            r.problem("set either corpus or synthetic.*, not both");
            None
        }
        (None, true) => {
            r.problem("missing required key \"corpus\" (or synthetic.* keys)");
            None
        }
    }
}

/// One results row. Sorting orders rows by their key columns.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ResultRow {
    pub key: RowKey,
    pub report: ReportSummary,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct RowKey {
    pub experiment: &'static str,
    pub seed: u64,
    pub embedding: String,
    pub architecture: &'static str,
    pub words: usize,
    /// Pool name, or `ensemble` for exp4's combined row.
    pub pool: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ReportSummary {
    pub accuracy: String,
    pub r_at_3: String,
    pub r_at_5: String,
    pub r_at_10: String,
}

impl From<&EvalReport> for ReportSummary {
    fn from(r: &EvalReport) -> Self {
        let at = |n| r.recall(n).map(percent_2dp_u64).unwrap_or_default();
        ReportSummary {
            accuracy: percent_2dp_u64(r.accuracy),
            r_at_3: at(3),
            r_at_5: at(5),
            r_at_10: at(10),
        }
    }
}

#[derive(Debug, Clone)]
pub struct HistoryRow {
    pub key: RowKey,
    pub history: History,
}

#[derive(Debug, Clone)]
pub struct KeyedImprovement {
    pub seed: u64,
    pub words: usize,
    pub embedding: String,
    pub row: ImprovementRow,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentOutcome {
    pub rows: Vec<ResultRow>,
    pub improvements: Vec<KeyedImprovement>,
    pub histories: Vec<HistoryRow>,
    /// Grid points that failed, with the error, in key order.
    pub failures: Vec<(String, String)>,
}

pub fn render_results_csv(rows: &[ResultRow]) -> String {
    let mut out = format!("{RESULTS_HEADER}\n");
    for r in rows {
        let k = &r.key;
        let m = &r.report;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            k.experiment, k.pool, k.words, k.architecture, k.embedding, k.seed, m.accuracy, m.r_at_3, m.r_at_5, m.r_at_10
        )
        .expect("write to String");
    }
    out
}

pub fn render_keyed_improvements(rows: &[KeyedImprovement]) -> String {
    let body = crate::report::render_improvement_csv(&rows.iter().map(|k| k.row.clone()).collect::<Vec<_>>());
    let mut out = format!("seed,words,embedding,{IMPROVEMENT_HEADER}\n");
    for (k, line) in rows.iter().zip(body.lines().skip(1)) {
        writeln!(out, "{},{},{},{line}", k.seed, k.words, k.embedding).expect("write to String");
    }
    out
}

pub fn render_history_csv(rows: &[HistoryRow]) -> String {
    let mut out = String::from("experiment,pool,words,architecture,embedding,seed,epoch,train_loss,validation_accuracy\n");
    for r in rows {
        let k = &r.key;
        for e in &r.history.epochs {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                k.experiment,
                k.pool,
                k.words,
                k.architecture,
                k.embedding,
                k.seed,
                e.epoch,
                e.train_loss,
                e.validation_accuracy.map(|a| a.to_string()).unwrap_or_default()
            )
            .expect("write to String");
        }
    }
    out
}

/// Everything one seed's grid points share.
struct SeedContext {
    seed: u64,
    docs: Vec<PatentDocument>,
    manifest: SplitManifest,
    tables: BTreeMap<String, EmbeddingTable>,
}

impl SeedContext {
    fn test_docs(&self) -> Result<Vec<&PatentDocument>> {
        Ok(resolve(&self.docs, &self.manifest.test)?)
    }

    fn table(&self, source: &EmbeddingSource) -> Option<&EmbeddingTable> {
        self.tables.get(&source.label())
    }
}

fn load_seed_context(cfg: &ExperimentConfig, seed: u64, file_docs: Option<&[PatentDocument]>, pretrained: &BTreeMap<String, EmbeddingTable>) -> Result<SeedContext> {
    let (docs, manifest) = match (&cfg.corpus, file_docs) {
        (CorpusSource::Synthetic(spec), _) => {
            let spec = SyntheticCorpusSpec { seed, ..spec.clone() };
            let docs = filter_admitted(&generate_synthetic(&spec)?);
            let ids: Vec<String> = docs.iter().map(|d| d.doc_id.clone()).collect();
            let manifest = split(&ids, seed)?;
            (docs, manifest)
        }
        (CorpusSource::File { split: Some(p), .. }, Some(docs)) => (docs.to_vec(), load_split(p)?),
        (CorpusSource::File { split: None, .. }, Some(docs)) => {
            let ids: Vec<String> = docs.iter().map(|d| d.doc_id.clone()).collect();
            let manifest = split(&ids, seed)?;
            (docs.to_vec(), manifest)
        }
        (CorpusSource::File { .. }, None) => unreachable!("file corpora are loaded before the grid"),
    };
    let mut tables = pretrained.clone();
    if cfg.embeddings.contains(&EmbeddingSource::Skipgram) {
        let train_docs = resolve(&docs, &manifest.train)?;
        let mut options = cfg.embedding_options.clone();
        options.skipgram.seed = seed::derive(seed, "skipgram");
        if let Some(t) = resolve_table(&EmbeddingSource::Skipgram, &options, &train_docs)? {
            tables.insert(EmbeddingSource::Skipgram.label(), t);
        }
    }
    Ok(SeedContext { seed, docs, manifest, tables })
}

#[derive(Debug, Clone)]
struct GridPoint {
    seed_index: usize,
    words: usize,
    architecture: Architecture,
    embedding: EmbeddingSource,
    /// `None` for exp4, whose point covers all three sections.
    pool: Option<PoolKind>,
}

struct PointOutput {
    rows: Vec<ResultRow>,
    histories: Vec<HistoryRow>,
    improvement: Option<KeyedImprovement>,
}

fn row_key(cfg: &ExperimentConfig, ctx: &SeedContext, p: &GridPoint, pool: String) -> RowKey {
    RowKey {
        experiment: cfg.experiment.name(),
        seed: ctx.seed,
        embedding: p.embedding.label(),
        architecture: p.architecture.name(),
        words: p.words,
        pool,
    }
}

fn train_one(cfg: &ExperimentConfig, ctx: &SeedContext, p: &GridPoint, pool: PoolKind, model_seed: u64) -> Result<ClassifierModel> {
    let config = cfg.model_config(p.architecture, pool, p.words, &p.embedding, model_seed);
    Ok(train_model(&ctx.docs, &ctx.manifest, config, cfg.min_count, ctx.table(&p.embedding))?.0)
}

fn run_point(cfg: &ExperimentConfig, ctx: &SeedContext, p: &GridPoint) -> Result<PointOutput> {
    let test = ctx.test_docs()?;
    match p.pool {
        Some(pool) => {
            let model_seed = seed::derive(ctx.seed, &format!("model:{}:{}:{}:{}", pool.name(), p.words, p.architecture, p.embedding.label()));
            let model = train_one(cfg, ctx, p, pool, model_seed)?;
            let report = evaluate_model(&model, &test)?;
            let key = row_key(cfg, ctx, p, pool.name().to_string());
            Ok(PointOutput {
                histories: vec![HistoryRow {
                    key: key.clone(),
                    history: model.history().clone(),
                }],
                rows: vec![ResultRow {
                    key,
                    report: (&report).into(),
                }],
                improvement: None,
            })
        }
        None => {
            let sections: Vec<Result<ClassifierModel>> = Section::ALL
                .par_iter()
                .map(|s| {
                    let pool = PoolKind::ALL.into_iter().find(|k| k.section() == Some(*s)).expect("every section has a pool");
                    train_one(cfg, ctx, p, pool, seed::derive(ctx.seed, &format!("member:{}", s.name())))
                })
                .collect();
            let members: Vec<ClassifierModel> = sections.into_iter().collect::<Result<_>>()?;
            let mut rows = Vec::with_capacity(4);
            let mut histories = Vec::with_capacity(3);
            let mut reports = Vec::with_capacity(3);
            for (m, s) in members.iter().zip(Section::ALL) {
                let report = evaluate_model(m, &test)?;
                let key = row_key(cfg, ctx, p, s.name().to_string());
                histories.push(HistoryRow {
                    key: key.clone(),
                    history: m.history().clone(),
                });
                rows.push(ResultRow {
                    key,
                    report: (&report).into(),
                });
                reports.push(report);
            }
            let members: [ClassifierModel; 3] = members.try_into().map_err(|_| Error::Format("expected three members".into()))?;
            let ensemble = EnsembleModel::new(members)?;
            let ens_report = evaluate_ensemble(&ensemble, &test)?;
            rows.push(ResultRow {
                key: row_key(cfg, ctx, p, "ensemble".into()),
                report: (&ens_report).into(),
            });
            let table = patclass_core::metrics::improvement_table(&[(
                p.architecture.name().to_string(),
                [&reports[0], &reports[1], &reports[2]],
                &ens_report,
            )]);
            Ok(PointOutput {
                rows,
                histories,
                improvement: table.into_iter().next().map(|row| KeyedImprovement {
                    seed: ctx.seed,
                    words: p.words,
                    embedding: p.embedding.label(),
                    row,
                }),
            })
        }
    }
}

fn describe(cfg: &ExperimentConfig, seed: u64, p: &GridPoint) -> String {
    format!(
        "{} seed={} pool={} words={} architecture={} embedding={}",
        cfg.experiment.name(),
        seed,
        p.pool.map_or("sections", PoolKind::name),
        p.words,
        p.architecture,
        p.embedding.label()
    )
}

/// Runs the whole grid on the current rayon pool. A failing point is logged to
/// stderr and skipped; results are sorted by key so output is independent of
/// scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let file_docs = match &cfg.corpus {
        CorpusSource::File { path, .. } => Some(load_documents(path)?),
        CorpusSource::Synthetic(_) => None,
    };
    let mut pretrained = BTreeMap::new();
    for e in &cfg.embeddings {
        if let EmbeddingSource::Pretrained(_) = e {
            let table = resolve_table(e, &cfg.embedding_options, &[])?.expect("pretrained sources resolve to a table");
            pretrained.insert(e.label(), table);
        }
    }
    let contexts: Vec<SeedContext> = cfg
        .seeds
        .par_iter()
        .map(|&s| load_seed_context(cfg, s, file_docs.as_deref(), &pretrained))
        .collect::<Result<_>>()?;

    let pools: Vec<Option<PoolKind>> = match cfg.experiment {
        ExperimentId::Exp4 => vec![None],
        _ => cfg.pools.iter().copied().map(Some).collect(),
    };
    let mut points = Vec::new();
    for seed_index in 0..contexts.len() {
        for &words in &cfg.words {
            for &architecture in &cfg.architectures {
                for embedding in &cfg.embeddings {
                    for &pool in &pools {
                        points.push(GridPoint {
                            seed_index,
                            words,
                            architecture,
                            embedding: embedding.clone(),
                            pool,
                        });
                    }
                }
            }
        }
    }
    let results: Vec<(String, Result<PointOutput>)> = points
        .par_iter()
        .map(|p| {
            let ctx = &contexts[p.seed_index];
            (describe(cfg, ctx.seed, p), run_point(cfg, ctx, p))
        })
        .collect();

    let mut outcome = ExperimentOutcome::default();
    for (name, r) in results {
        match r {
            Ok(out) => {
                outcome.rows.extend(out.rows);
                outcome.histories.extend(out.histories);
                outcome.improvements.extend(out.improvement);
            }
            Err(e) => {
                eprintln!("grid point failed ({name}): {e}");
                outcome.failures.push((name, e.to_string()));
            }
        }
    }
    outcome.rows.sort();
    outcome.histories.sort_by(|a, b| a.key.cmp(&b.key));
    outcome
        .improvements
        .sort_by(|a, b| (a.seed, a.words, &a.embedding, &a.row.architecture).cmp(&(b.seed, b.words, &b.embedding, &b.row.architecture)));
    outcome.failures.sort();
    Ok(outcome)
}

/// Writes the results CSV, plus the improvement table for exp4 and the per-epoch
/// history when requested.
pub fn write_outcome(cfg: &ExperimentConfig, outcome: &ExperimentOutcome, out: &Path) -> Result<()> {
    write_file(&out.join(RESULTS_FILE), render_results_csv(&outcome.rows).as_bytes())?;
    if cfg.experiment == ExperimentId::Exp4 {
        write_file(&out.join(IMPROVEMENT_FILE), render_keyed_improvements(&outcome.improvements).as_bytes())?;
    }
    if cfg.write_history {
        write_file(&out.join(HISTORY_FILE), render_history_csv(&outcome.histories).as_bytes())?;
    }
    Ok(())
}
