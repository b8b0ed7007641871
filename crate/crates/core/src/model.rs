//! The five standalone classifiers (CNN, LSTM, GRU, Bi-LSTM, Bi-GRU), their
//! training loop and inference.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::PoolKind;
use crate::embeddings::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::labels::LabelVocabulary;
use crate::layers::{
    dropout, run_sequence, spatial_dropout, Activation, Bidirectional, Conv1d, Dense, Embedding, GruCell, LstmCell, Mode,
};
use crate::optim::{Adam, AdamConfig};
use crate::params::ParamStore;
use crate::seed::{self, Rng};
use crate::tensor::Tensor;
use crate::textprep::{FeatureSpec, TokenSequence, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Cnn,
    Lstm,
    Gru,
    BiLstm,
    BiGru,
}

impl Architecture {
    pub const ALL: [Architecture; 5] = [
        Architecture::Cnn,
        Architecture::BiLstm,
        Architecture::BiGru,
        Architecture::Lstm,
        Architecture::Gru,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Architecture::Cnn => "cnn",
            Architecture::Lstm => "lstm",
            Architecture::Gru => "gru",
            Architecture::BiLstm => "bilstm",
            Architecture::BiGru => "bigru",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == name)
    }

    pub fn is_recurrent(self) -> bool {
        self != Architecture::Cnn
    }

    /// 5 epochs for the CNN, 15 for recurrent models.
    pub fn default_epochs(self) -> usize {
        if self.is_recurrent() {
            15
        } else {
            5
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl core::str::FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::from_name(s).ok_or_else(|| Error::Config(alloc::format!("unknown architecture {s:?}")))
    }
}

/// Where the initial embedding rows come from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "name", rename_all = "snake_case")]
pub enum EmbeddingSource {
    /// Uniform `[-0.05, 0.05]`, learned with the model.
    Random,
    /// Skip-gram vectors trained on the training split.
    Skipgram,
    /// A word-vector file, identified by a short name (e.g. `fasttext`).
    Pretrained(String),
}

impl core::str::FromStr for EmbeddingSource {
    type Err = Error;

    /// `random`, `skipgram`, or any other name for a pretrained file.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "" => Err(Error::Config("empty embedding name".into())),
            "random" => Ok(EmbeddingSource::Random),
            "skipgram" => Ok(EmbeddingSource::Skipgram),
            name => Ok(EmbeddingSource::Pretrained(name.to_string())),
        }
    }
}

impl EmbeddingSource {
    pub fn label(&self) -> String {
        match self {
            EmbeddingSource::Random => "random".to_string(),
            EmbeddingSource::Skipgram => "skipgram".to_string(),
            EmbeddingSource::Pretrained(name) => name.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub architecture: Architecture,
    pub pool: PoolKind,
    pub feature: FeatureSpec,
    pub embedding: EmbeddingSource,
    pub embedding_dim: usize,
    pub trainable_embeddings: bool,
    pub batch_size: usize,
    pub epochs: usize,
    pub optimizer: AdamConfig,
    pub seed: u64,
    pub conv_filters: usize,
    pub kernel_size: usize,
    pub dense_units: usize,
    pub dropout: f64,
    pub spatial_dropout: f64,
    pub hidden_size: usize,
}

impl ModelConfig {
    /// Defaults: batch 128, per-architecture epochs, Adam 1e-3, 300-d embeddings,
    /// 128 filters of width 5, dense 1024, dropout 0.5, spatial dropout 0.1, 128 hidden units.
    pub fn new(architecture: Architecture, pool: PoolKind, feature: FeatureSpec) -> Self {
        ModelConfig {
            architecture,
            pool,
            feature,
            embedding: EmbeddingSource::Random,
            embedding_dim: 300,
            trainable_embeddings: true,
            batch_size: 128,
            epochs: architecture.default_epochs(),
            optimizer: AdamConfig::default(),
            seed: 0,
            conv_filters: 128,
            kernel_size: 5,
            dense_units: 1024,
            dropout: 0.5,
            spatial_dropout: 0.1,
            hidden_size: 128,
        }
    }

    pub fn sequence_length(&self) -> usize {
        self.feature.sequence_length()
    }

    /// Every problem with the configuration, joined into one error.
    pub fn validate(&self) -> Result<()> {
        let mut problems: Vec<String> = Vec::new();
        let mut check = |ok: bool, msg: &str| {
            if !ok {
                problems.push(msg.to_string());
            }
        };
        check(self.feature.words() >= 1, "word count must be at least 1");
        check(
            matches!(
                (self.pool, self.feature),
                (PoolKind::PerSection, FeatureSpec::FirstYPerSection(_))
            ) || !matches!(self.pool, PoolKind::PerSection) && matches!(self.feature, FeatureSpec::FirstX(_)),
            "per_section pool pairs with first-Y selection, other pools with first-X",
        );
        check(self.embedding_dim >= 1, "embedding_dim must be at least 1");
        check(self.batch_size >= 1, "batch_size must be at least 1");
        check(self.epochs >= 1, "epochs must be at least 1");
        check(self.optimizer.learning_rate > 0.0, "learning_rate must be positive");
        check((0.0..1.0).contains(&self.dropout), "dropout must lie in [0, 1)");
        check((0.0..1.0).contains(&self.spatial_dropout), "spatial_dropout must lie in [0, 1)");
        if self.architecture == Architecture::Cnn {
            check(self.conv_filters >= 1, "conv_filters must be at least 1");
            check(self.kernel_size >= 1, "kernel_size must be at least 1");
            check(self.dense_units >= 1, "dense_units must be at least 1");
            check(
                self.sequence_length() >= self.kernel_size,
                "sequence length must be at least the kernel size",
            );
        } else {
            check(self.hidden_size >= 1, "hidden_size must be at least 1");
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Encoder {
    Lstm(LstmCell),
    Gru(GruCell),
    BiLstm(Bidirectional<LstmCell>),
    BiGru(Bidirectional<GruCell>),
}

#[derive(Debug, Clone, Copy)]
enum Network {
    Cnn {
        embedding: Embedding,
        conv: Conv1d,
        hidden: Dense,
        output: Dense,
    },
    Rnn {
        embedding: Embedding,
        encoder: Encoder,
        output: Dense,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    /// Loss of the very first minibatch, before any update.
    pub first_batch_loss: Option<f64>,
    pub epochs: Vec<EpochRecord>,
}

/// An encoded sequence with the index of its gold label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSequence {
    pub sequence: TokenSequence,
    pub label: usize,
}

/// Per-label probabilities aligned with the label vocabulary.
pub type ProbabilityVector = Vec<f32>;

#[derive(Debug, Clone)]
pub struct ClassifierModel {
    config: ModelConfig,
    params: ParamStore<f32>,
    vocab: Vocabulary,
    labels: LabelVocabulary,
    network: Network,
    history: History,
}

/// Embedding -> conv1d -> max over time -> dense(relu) -> dropout -> dense(softmax).
pub fn build_cnn(
    config: ModelConfig,
    vocab: Vocabulary,
    labels: LabelVocabulary,
    matrix: Option<EmbeddingMatrix>,
) -> Result<ClassifierModel> {
    if config.architecture != Architecture::Cnn {
        return Err(Error::Config(alloc::format!("build_cnn called for {}", config.architecture)));
    }
    ClassifierModel::build(config, vocab, labels, matrix)
}

/// Embedding -> spatial dropout -> (bi)recurrent encoder -> dense(softmax).
pub fn build_rnn(
    config: ModelConfig,
    vocab: Vocabulary,
    labels: LabelVocabulary,
    matrix: Option<EmbeddingMatrix>,
) -> Result<ClassifierModel> {
    if !config.architecture.is_recurrent() {
        return Err(Error::Config(alloc::format!("build_rnn called for {}", config.architecture)));
    }
    ClassifierModel::build(config, vocab, labels, matrix)
}

impl ClassifierModel {
    /// Builds either family. Without `matrix`, embeddings start uniform in `[-0.05, 0.05]`.
    pub fn build(
        config: ModelConfig,
        vocab: Vocabulary,
        labels: LabelVocabulary,
        matrix: Option<EmbeddingMatrix>,
    ) -> Result<Self> {
        config.validate()?;
        if labels.len() < 2 {
            return Err(Error::Config("at least two labels are required".into()));
        }
        let matrix = match matrix {
            Some(m) => {
                if m.rows != vocab.len() || m.dim != config.embedding_dim {
                    return Err(Error::Config(alloc::format!(
                        "embedding matrix is {}x{}, model expects {}x{}",
                        m.rows,
                        m.dim,
                        vocab.len(),
                        config.embedding_dim
                    )));
                }
                m
            }
            None => EmbeddingMatrix::random(vocab.len(), config.embedding_dim, seed::derive(config.seed, "embedding")),
        };
        let mut rng = seed::derived_rng(config.seed, "init");
        let mut params = ParamStore::new();
        let dim = config.embedding_dim;
        let n_labels = labels.len();
        let embedding = Embedding::new(&mut params, "embedding", matrix.into_tensor(), config.trainable_embeddings);
        let network = match config.architecture {
            Architecture::Cnn => {
                let conv = Conv1d::new(&mut params, &mut rng, "conv", dim, config.conv_filters, config.kernel_size);
                let hidden = Dense::new(
                    &mut params,
                    &mut rng,
                    "hidden",
                    config.conv_filters,
                    config.dense_units,
                    Activation::Relu,
                );
                let output = Dense::new(&mut params, &mut rng, "output", config.dense_units, n_labels, Activation::Softmax);
                Network::Cnn {
                    embedding,
                    conv,
                    hidden,
                    output,
                }
            }
            arch => {
                let h = config.hidden_size;
                let (encoder, width) = match arch {
                    Architecture::Lstm => (Encoder::Lstm(LstmCell::new(&mut params, &mut rng, "lstm", dim, h)), h),
                    Architecture::Gru => (Encoder::Gru(GruCell::new(&mut params, &mut rng, "gru", dim, h)), h),
                    Architecture::BiLstm => (
                        Encoder::BiLstm(Bidirectional {
                            forward: LstmCell::new(&mut params, &mut rng, "lstm_fwd", dim, h),
                            backward: LstmCell::new(&mut params, &mut rng, "lstm_bwd", dim, h),
                        }),
                        2 * h,
                    ),
                    _ => (
                        Encoder::BiGru(Bidirectional {
                            forward: GruCell::new(&mut params, &mut rng, "gru_fwd", dim, h),
                            backward: GruCell::new(&mut params, &mut rng, "gru_bwd", dim, h),
                        }),
                        2 * h,
                    ),
                };
                let output = Dense::new(&mut params, &mut rng, "output", width, n_labels, Activation::Softmax);
                Network::Rnn {
                    embedding,
                    encoder,
                    output,
                }
            }
        };
        Ok(ClassifierModel {
            config,
            params,
            vocab,
            labels,
            network,
            history: History::default(),
        })
    }

    /// Rebuilds a model from stored tensors; every parameter must be present with its built shape.
    pub fn from_parts(
        config: ModelConfig,
        vocab: Vocabulary,
        labels: LabelVocabulary,
        history: History,
        tensors: Vec<(String, Tensor<f32>)>,
    ) -> Result<Self> {
        let mut model = Self::build(config, vocab, labels, None)?;
        let mut filled = vec![false; model.params.len()];
        for (name, tensor) in tensors {
            let id = model
                .params
                .find(&name)
                .ok_or_else(|| Error::Config(alloc::format!("unexpected tensor {name:?}")))?;
            if model.params.value(id).shape() != tensor.shape() {
                return Err(Error::Config(alloc::format!(
                    "tensor {name:?} has shape {:?}, expected {:?}",
                    tensor.shape(),
                    model.params.value(id).shape()
                )));
            }
            *model.params.value_mut(id) = tensor;
            filled[id.index()] = true;
        }
        if let Some(missing) = filled.iter().position(|f| !f) {
            let name = model.params.iter().nth(missing).map(|(_, p)| p.name.clone()).unwrap_or_default();
            return Err(Error::Config(alloc::format!("missing tensor {name:?}")));
        }
        model.history = history;
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn labels(&self) -> &LabelVocabulary {
        &self.labels
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn params(&self) -> &ParamStore<f32> {
        &self.params
    }

    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    fn forward(
        &self,
        g: &mut Graph<'_, f32>,
        batch: &[&TokenSequence],
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<Var> {
        let len = self.config.sequence_length();
        let mut indices = Vec::with_capacity(batch.len() * len);
        for seq in batch {
            if seq.indices.len() != len {
                return Err(Error::SequenceLength {
                    expected: len,
                    found: seq.indices.len(),
                });
            }
            indices.extend_from_slice(&seq.indices);
        }
        let n = batch.len();
        match &self.network {
            Network::Cnn {
                embedding,
                conv,
                hidden,
                output,
            } => {
                let x = embedding.forward(g, &indices, n, len)?;
                let x = conv.forward(g, x)?;
                let x = g.max_over_axis(x, 1)?;
                let x = hidden.forward(g, x)?;
                let x = dropout(g, x, self.config.dropout, mode, rng)?;
                output.forward(g, x)
            }
            Network::Rnn {
                embedding,
                encoder,
                output,
            } => {
                let lengths: Vec<usize> = batch.iter().map(|s| s.true_length.min(len)).collect();
                let x = embedding.forward(g, &indices, n, len)?;
                let x = spatial_dropout(g, x, self.config.spatial_dropout, mode, rng)?;
                let h = match encoder {
                    Encoder::Lstm(c) => run_sequence(g, c, x, &lengths, false)?.h,
                    Encoder::Gru(c) => run_sequence(g, c, x, &lengths, false)?.h,
                    Encoder::BiLstm(b) => b.forward(g, x, &lengths)?,
                    Encoder::BiGru(b) => b.forward(g, x, &lengths)?,
                };
                output.forward(g, h)
            }
        }
    }

    /// Probability vectors in evaluation mode; batching does not change the result.
    pub fn predict_proba(&self, sequences: &[TokenSequence]) -> Result<Vec<ProbabilityVector>> {
        let mut out = Vec::with_capacity(sequences.len());
        let mut rng = seed::rng(0);
        for chunk in sequences.chunks(self.config.batch_size.max(1)) {
            let batch: Vec<&TokenSequence> = chunk.iter().collect();
            let mut g = Graph::new(&self.params);
            let probs = self.forward(&mut g, &batch, Mode::Eval, &mut rng)?;
            let c = self.num_labels();
            out.extend(g.value(probs).data().chunks(c).map(<[f32]>::to_vec));
        }
        Ok(out)
    }

    /// Minibatch cross-entropy training with Adam for `config.epochs` epochs.
    /// Batch order and dropout masks are drawn from seeds derived from `config.seed`;
    /// the last short batch is kept. Validation accuracy is recorded, never acted on.
    pub fn train(&mut self, train: &[LabeledSequence], validation: &[LabeledSequence]) -> Result<&History> {
        if train.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let c = self.num_labels();
        if let Some(bad) = train.iter().chain(validation).find(|s| s.label >= c) {
            return Err(Error::UnknownLabel(alloc::format!("index {}", bad.label)));
        }
        let mut order_rng = seed::derived_rng(self.config.seed, "batch-order");
        let mut dropout_rng = seed::derived_rng(self.config.seed, "dropout");
        let mut adam = Adam::new(self.config.optimizer, &self.params);
        let mut order: Vec<usize> = (0..train.len()).collect();
        self.params.zero_grad();
        for epoch in 0..self.config.epochs {
            order.shuffle(&mut order_rng);
            let mut total = 0.0f64;
            for chunk in order.chunks(self.config.batch_size) {
                let batch: Vec<&TokenSequence> = chunk.iter().map(|&i| &train[i].sequence).collect();
                let mut target = vec![0.0f32; chunk.len() * c];
                for (row, &i) in chunk.iter().enumerate() {
                    target[row * c + train[i].label] = 1.0;
                }
                let grads = {
                    let mut g = Graph::new(&self.params);
                    let probs = self.forward(&mut g, &batch, Mode::Train, &mut dropout_rng)?;
                    let target = g.constant(Tensor::new(&[chunk.len(), c], target)?);
                    let loss = g.cross_entropy(probs, target)?;
                    let value = g.value(loss).item().unwrap_or(0.0) as f64;
                    if self.history.first_batch_loss.is_none() {
                        self.history.first_batch_loss = Some(value);
                    }
                    total += value * chunk.len() as f64;
                    g.backward(loss)?
                };
                self.params.accumulate(&grads);
                adam.step(&mut self.params);
                self.params.zero_grad();
            }
            let validation_accuracy = if validation.is_empty() {
                None
            } else {
                Some(self.accuracy_on(validation)?)
            };
            self.history.epochs.push(EpochRecord {
                epoch: epoch + 1,
                train_loss: total / train.len() as f64,
                validation_accuracy,
            });
        }
        Ok(&self.history)
    }

    /// Fraction of `data` whose arg-max prediction equals the gold label.
    pub fn accuracy_on(&self, data: &[LabeledSequence]) -> Result<f64> {
        if data.is_empty() {
            return Ok(0.0);
        }
        let seqs: Vec<TokenSequence> = data.iter().map(|d| d.sequence.clone()).collect();
        let probs = self.predict_proba(&seqs)?;
        let correct = probs
            .iter()
            .zip(data)
            .filter(|(p, d)| argmax(p) == d.label)
            .count();
        Ok(correct as f64 / data.len() as f64)
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(p: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::IpcSubclass;
    use crate::textprep::{build_vocabulary, encode};

    fn labels(n: usize) -> LabelVocabulary {
        let codes = ["A01B", "B02C", "C03D", "D04E", "E05F", "F06G"];
        LabelVocabulary::new(codes[..n].iter().map(|c| IpcSubclass::parse(c).unwrap()))
    }

    fn small(arch: Architecture, words: usize) -> ModelConfig {
        ModelConfig {
            embedding_dim: 8,
            conv_filters: 6,
            kernel_size: 3,
            dense_units: 16,
            hidden_size: 5,
            batch_size: 4,
            ..ModelConfig::new(arch, PoolKind::AllSections, FeatureSpec::FirstX(words))
        }
    }

    fn vocab() -> Vocabulary {
        let toks: Vec<String> = ["a", "b", "c", "d", "e"].iter().map(|s| s.to_string()).collect();
        build_vocabulary(&[toks], 1)
    }

    fn seqs(n: usize, len: usize, v: &Vocabulary) -> Vec<TokenSequence> {
        (0..n)
            .map(|i| {
                let toks: Vec<String> = (0..(i % len) + 1).map(|j| ["a", "b", "c", "d", "e", "zz"][(i + j) % 6].to_string()).collect();
                encode(&alloc::format!("d{i}"), &toks, v, len)
            })
            .collect()
    }

    #[test]
    fn output_shape_and_normalisation() {
        for arch in Architecture::ALL {
            let m = ClassifierModel::build(small(arch, 7), vocab(), labels(3), None).unwrap();
            let probs = m.predict_proba(&seqs(2, 7, &vocab())).unwrap();
            assert_eq!(probs.len(), 2);
            for p in probs {
                assert_eq!(p.len(), 3);
                let s: f32 = p.iter().sum();
                assert!((s - 1.0).abs() < 1e-5, "{arch}: {s}");
                assert!(p.iter().all(|&x| x > 0.0));
            }
        }
    }

    #[test]
    fn batched_equals_single() {
        for arch in Architecture::ALL {
            let m = ClassifierModel::build(small(arch, 6), vocab(), labels(3), None).unwrap();
            let data = seqs(9, 6, &vocab());
            let batched = m.predict_proba(&data).unwrap();
            for (s, b) in data.iter().zip(&batched) {
                let one = m.predict_proba(core::slice::from_ref(s)).unwrap();
                assert_eq!(&one[0], b, "{arch}");
            }
            assert_eq!(m.predict_proba(&data).unwrap(), batched);
        }
    }

    #[test]
    fn wrong_sequence_length_errors() {
        let m = ClassifierModel::build(small(Architecture::Gru, 6), vocab(), labels(3), None).unwrap();
        let bad = seqs(1, 5, &vocab());
        assert_eq!(
            m.predict_proba(&bad).unwrap_err(),
            Error::SequenceLength { expected: 6, found: 5 }
        );
    }

    #[test]
    fn builders_check_family() {
        assert!(build_cnn(small(Architecture::Lstm, 6), vocab(), labels(2), None).is_err());
        assert!(build_rnn(small(Architecture::Cnn, 6), vocab(), labels(2), None).is_err());
        assert!(build_rnn(small(Architecture::BiGru, 6), vocab(), labels(2), None).is_ok());
    }

    #[test]
    fn config_validation_lists_every_problem() {
        let mut c = small(Architecture::Cnn, 2);
        c.batch_size = 0;
        c.dropout = 1.5;
        let Err(Error::Config(msg)) = c.validate() else { panic!() };
        assert!(msg.contains("batch_size"));
        assert!(msg.contains("dropout"));
        assert!(msg.contains("kernel size"));
    }

    #[test]
    fn empty_training_set_errors() {
        let mut m = ClassifierModel::build(small(Architecture::Cnn, 6), vocab(), labels(2), None).unwrap();
        assert_eq!(m.train(&[], &[]).unwrap_err(), Error::EmptyTrainingSet);
    }

    #[test]
    fn training_is_deterministic() {
        let v = vocab();
        let data: Vec<LabeledSequence> = seqs(10, 6, &v)
            .into_iter()
            .enumerate()
            .map(|(i, s)| LabeledSequence { sequence: s, label: i % 2 })
            .collect();
        let run = || {
            let mut c = small(Architecture::BiLstm, 6);
            c.epochs = 2;
            let mut m = ClassifierModel::build(c, v.clone(), labels(2), None).unwrap();
            m.train(&data, &data[..3]).unwrap();
            m
        };
        let (a, b) = (run(), run());
        for ((_, pa), (_, pb)) in a.params().iter().zip(b.params().iter()) {
            assert_eq!(pa.value, pb.value);
        }
        assert_eq!(a.history(), b.history());
        assert_eq!(a.history().epochs.len(), 2);
    }

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.1, 0.7, 0.2]), 1);
    }
}
