//! Word vectors: tables from pretrained files or skip-gram training, and the
//! model's embedding matrix assembled over a [`Vocabulary`].

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods shadow these whenever std is linked
use num_traits::Float;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::tensor::Tensor;
use crate::textprep::{Vocabulary, PAD, UNK};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableSource {
    PretrainedFile,
    SkipgramTrained,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: BTreeMap<String, Vec<f32>>,
    pub source: TableSource,
}

impl EmbeddingTable {
    pub fn new(dim: usize, source: TableSource) -> Self {
        EmbeddingTable {
            dim,
            vectors: BTreeMap::new(),
            source,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Adds or replaces a vector; rejects wrong lengths and non-finite entries.
    pub fn insert(&mut self, token: impl Into<String>, vector: Vec<f32>) -> Result<()> {
        let token = token.into();
        if vector.len() != self.dim {
            return Err(Error::Config(alloc::format!(
                "vector for {token:?} has {} components, expected {}",
                vector.len(),
                self.dim
            )));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(alloc::format!("vector for {token:?} is not finite")));
        }
        self.vectors.insert(token, vector);
        Ok(())
    }

    pub fn get(&self, token: &str) -> Option<&[f32]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }
}

pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        dot += x as f64 * y as f64;
        na += x as f64 * x as f64;
        nb += y as f64 * y as f64;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na.sqrt() * nb.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: usize,
    pub epochs: usize,
    pub negative_samples: usize,
    pub learning_rate: f64,
    pub min_learning_rate: f64,
    pub min_count: usize,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        SkipGramConfig {
            dim: 300,
            window: 8,
            epochs: 20,
            negative_samples: 5,
            learning_rate: 0.025,
            min_learning_rate: 0.0001,
            min_count: 1,
            seed: 0,
        }
    }
}

impl SkipGramConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.dim == 0 {
            problems.push("dim must be at least 1");
        }
        if self.window == 0 {
            problems.push("window must be at least 1");
        }
        if self.epochs == 0 {
            problems.push("epochs must be at least 1");
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            problems.push("learning rate must be positive");
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkipGramReport {
    /// Mean negative-sampling loss per (center, context) pair, one entry per epoch.
    pub epoch_losses: Vec<f64>,
    pub pairs_per_epoch: Vec<u64>,
}

#[inline]
fn sigmoid(x: f32) -> f32 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(sigmoid(x))` without overflow.
#[inline]
fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Skip-gram with negative sampling over a stream of tokenized documents.
///
/// For each center position a window `1..=window` is drawn; every context
/// inside it is a positive pair and `negative_samples` noise words are drawn
/// from the unigram distribution raised to 0.75. The learning rate decays
/// linearly from `learning_rate` to `min_learning_rate` over all epochs.
/// Runs on one thread and is deterministic for a fixed seed.
pub fn train_skipgram(documents: &[Vec<String>], config: &SkipGramConfig) -> Result<(EmbeddingTable, SkipGramReport)> {
    config.validate()?;
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for doc in documents {
        for t in doc {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    let mut words: Vec<(&str, u64)> = counts.into_iter().filter(|&(_, c)| c >= config.min_count as u64).collect();
    if words.is_empty() {
        return Err(Error::EmptyStream);
    }
    words.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let ids: BTreeMap<&str, usize> = words.iter().enumerate().map(|(i, &(w, _))| (w, i)).collect();
    let corpus: Vec<Vec<usize>> = documents
        .iter()
        .map(|d| d.iter().filter_map(|t| ids.get(t.as_str()).copied()).collect())
        .collect();
    let total_tokens: u64 = corpus.iter().map(|d| d.len() as u64).sum();

    let mut cumulative = Vec::with_capacity(words.len());
    let mut acc = 0.0f64;
    for &(_, c) in &words {
        acc += (c as f64).powf(0.75);
        cumulative.push(acc);
    }

    let dim = config.dim;
    let vocab = words.len();
    let mut rng = seed::rng(config.seed);
    let bound = 0.5 / dim as f64;
    let mut input: Vec<f32> = (0..vocab * dim).map(|_| rng.gen_range(-bound..bound) as f32).collect();
    let mut output = vec![0.0f32; vocab * dim];
    let mut grad = vec![0.0f32; dim];

    let total_steps = (total_tokens * config.epochs as u64).max(1) as f64;
    let mut processed = 0u64;
    let mut report = SkipGramReport {
        epoch_losses: Vec::with_capacity(config.epochs),
        pairs_per_epoch: Vec::with_capacity(config.epochs),
    };

    for _ in 0..config.epochs {
        let (mut loss, mut pairs) = (0.0f64, 0u64);
        for doc in &corpus {
            for (pos, &center) in doc.iter().enumerate() {
                let progress = processed as f64 / total_steps;
                let lr = (config.learning_rate - (config.learning_rate - config.min_learning_rate) * progress) as f32;
                processed += 1;
                let reach = rng.gen_range(1..=config.window);
                let lo = pos.saturating_sub(reach);
                let hi = (pos + reach).min(doc.len() - 1);
                for (ctx_pos, &context) in doc.iter().enumerate().take(hi + 1).skip(lo) {
                    if ctx_pos == pos {
                        continue;
                    }
                    let v = center * dim;
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    for k in 0..=config.negative_samples {
                        let (target, label) = if k == 0 {
                            (context, 1.0f32)
                        } else {
                            let r = rng.gen::<f64>() * acc;
                            let w = cumulative.partition_point(|&c| c <= r).min(vocab - 1);
                            if w == context {
                                continue;
                            }
                            (w, 0.0)
                        };
                        let u = target * dim;
                        let dot: f32 = input[v..v + dim].iter().zip(&output[u..u + dim]).map(|(a, b)| a * b).sum();
                        loss -= if label > 0.0 { log_sigmoid(dot as f64) } else { log_sigmoid(-dot as f64) };
                        let step = (label - sigmoid(dot)) * lr;
                        for i in 0..dim {
                            grad[i] += step * output[u + i];
                            output[u + i] += step * input[v + i];
                        }
                    }
                    for i in 0..dim {
                        input[v + i] += grad[i];
                    }
                    pairs += 1;
                }
            }
        }
        report.epoch_losses.push(if pairs == 0 { 0.0 } else { loss / pairs as f64 });
        report.pairs_per_epoch.push(pairs);
    }

    let mut table = EmbeddingTable::new(dim, TableSource::SkipgramTrained);
    for (i, &(w, _)) in words.iter().enumerate() {
        table.insert(w, input[i * dim..(i + 1) * dim].to_vec())?;
    }
    Ok((table, report))
}

/// `[rows, dim]` weights for the embedding layer; row 0 (padding) is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub rows: usize,
    pub dim: usize,
    pub data: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn into_tensor(self) -> Tensor<f32> {
        Tensor::new(&[self.rows, self.dim], self.data).expect("rows * dim")
    }

    /// Uniform `[-0.05, 0.05]` rows for a vocabulary with no pretrained table.
    pub fn random(vocab_size: usize, dim: usize, seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        let mut data: Vec<f32> = (0..vocab_size * dim).map(|_| rng.gen_range(-0.05f32..=0.05)).collect();
        data[..dim].iter_mut().for_each(|x| *x = 0.0);
        EmbeddingMatrix {
            rows: vocab_size,
            dim,
            data,
        }
    }
}

/// Rows follow vocabulary order. Tokens found in `table` copy its vector; the
/// unknown row is drawn uniformly from `[-0.05, 0.05]` under `seed`, and every
/// token missing from the table reuses that row.
pub fn assemble_matrix(vocab: &Vocabulary, table: &EmbeddingTable, seed: u64) -> EmbeddingMatrix {
    let dim = table.dim();
    let mut rng = seed::rng(seed);
    let unknown: Vec<f32> = (0..dim).map(|_| rng.gen_range(-0.05f32..=0.05)).collect();
    let mut data = Vec::with_capacity(vocab.len() * dim);
    for (i, token) in vocab.tokens().iter().enumerate() {
        let i = i as u32;
        if i == PAD {
            data.extend(core::iter::repeat_n(0.0, dim));
        } else if i == UNK {
            data.extend_from_slice(&unknown);
        } else {
            data.extend_from_slice(table.get(token).unwrap_or(&unknown));
        }
    }
    EmbeddingMatrix {
        rows: vocab.len(),
        dim,
        data,
    }
}

/// Copies the rows of a matrix back into a table keyed by vocabulary token,
/// skipping the reserved rows.
pub fn matrix_to_table(vocab: &Vocabulary, matrix: &EmbeddingMatrix, source: TableSource) -> Result<EmbeddingTable> {
    let mut table = EmbeddingTable::new(matrix.dim, source);
    for (i, token) in vocab.tokens().iter().enumerate().skip(2) {
        table.insert(token.to_string(), matrix.row(i).to_vec())?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textprep::build_vocabulary;

    fn paired_corpus(pairs: usize, docs_per_pair: usize, len: usize) -> Vec<Vec<String>> {
        let mut docs = Vec::new();
        for d in 0..docs_per_pair {
            for p in 0..pairs {
                let (a, b) = (alloc::format!("x{p}"), alloc::format!("y{p}"));
                let doc = (0..len).map(|i| if (i + d) % 2 == 0 { a.clone() } else { b.clone() }).collect();
                docs.push(doc);
            }
        }
        docs
    }

    fn small() -> SkipGramConfig {
        SkipGramConfig {
            dim: 16,
            epochs: 5,
            ..SkipGramConfig::default()
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let corpus = paired_corpus(3, 2, 12);
        let (a, ra) = train_skipgram(&corpus, &small()).unwrap();
        let (b, rb) = train_skipgram(&corpus, &small()).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
    }

    #[test]
    fn single_token_corpus_trains() {
        let corpus = alloc::vec![alloc::vec!["solo".to_string()]];
        let (t, r) = train_skipgram(&corpus, &small()).unwrap();
        assert_eq!(t.len(), 1);
        assert!(t.get("solo").unwrap().iter().all(|v| v.is_finite()));
        assert_eq!(r.pairs_per_epoch, [0; 5]);
    }

    #[test]
    fn empty_stream_errors() {
        assert_eq!(train_skipgram(&[], &small()), Err(Error::EmptyStream));
        assert_eq!(train_skipgram(&[Vec::new()], &small()), Err(Error::EmptyStream));
    }

    #[test]
    fn initial_vectors_lie_in_init_range() {
        let corpus = alloc::vec![alloc::vec!["solo".to_string()]];
        let cfg = SkipGramConfig { dim: 8, epochs: 1, ..SkipGramConfig::default() };
        let (t, _) = train_skipgram(&corpus, &cfg).unwrap();
        assert!(t.get("solo").unwrap().iter().all(|v| v.abs() <= 0.5 / 8.0));
    }

    #[test]
    fn matrix_rows_follow_policy() {
        let vocab = build_vocabulary(&[alloc::vec!["a".to_string(), "b".to_string()]], 1);
        let mut table = EmbeddingTable::new(2, TableSource::PretrainedFile);
        table.insert("a", alloc::vec![1.0, 2.0]).unwrap();
        let m = assemble_matrix(&vocab, &table, 3);
        assert_eq!(m.row(0), &[0.0, 0.0]);
        assert_eq!(m.row(vocab.index_of("a") as usize), &[1.0, 2.0]);
        assert_eq!(m.row(vocab.index_of("b") as usize), m.row(1));
        assert!(m.row(1).iter().all(|v| v.abs() <= 0.05));
        assert_eq!(assemble_matrix(&vocab, &table, 3), m);
    }

    #[test]
    fn table_rejects_bad_vectors() {
        let mut table = EmbeddingTable::new(2, TableSource::PretrainedFile);
        assert!(table.insert("a", alloc::vec![1.0]).is_err());
        assert!(table.insert("a", alloc::vec![f32::NAN, 0.0]).is_err());
    }
}
