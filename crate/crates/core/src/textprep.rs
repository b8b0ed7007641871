//! Tokenization, first-X / first-Y word selection, vocabulary and padded encoding.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{PatentDocument, PoolKind, Section};
use crate::error::{Error, Result};

pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
pub const PAD: u32 = 0;
pub const UNK: u32 = 1;

/// Lowercases and splits on every run of non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

/// How many leading words represent a document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "words", rename_all = "snake_case")]
pub enum FeatureSpec {
    /// First `X` words of one pool text.
    FirstX(usize),
    /// First `Y` words of each section, concatenated; length `3 * Y`.
    FirstYPerSection(usize),
}

impl FeatureSpec {
    pub fn sequence_length(&self) -> usize {
        match *self {
            FeatureSpec::FirstX(x) => x,
            FeatureSpec::FirstYPerSection(y) => 3 * y,
        }
    }

    pub fn words(&self) -> usize {
        match *self {
            FeatureSpec::FirstX(x) | FeatureSpec::FirstYPerSection(x) => x,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.words() == 0 {
            return Err(Error::Config("word count must be at least 1".into()));
        }
        Ok(())
    }

    /// Feature spec matching a pool: per-section pools use first-Y, all others first-X.
    pub fn for_pool(pool: PoolKind, words: usize) -> Self {
        match pool {
            PoolKind::PerSection => FeatureSpec::FirstYPerSection(words),
            _ => FeatureSpec::FirstX(words),
        }
    }
}

impl core::fmt::Display for FeatureSpec {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match *self {
            FeatureSpec::FirstX(x) => write!(f, "first {x} words"),
            FeatureSpec::FirstYPerSection(y) => write!(f, "first {y} words per section"),
        }
    }
}

pub fn select_first(tokens: &[String], x: usize) -> Vec<String> {
    tokens[..x.min(tokens.len())].to_vec()
}

/// First `y` tokens of each section, in section order.
pub fn select_per_section(sections: [&[String]; 3], y: usize) -> Vec<String> {
    sections.iter().flat_map(|s| s[..y.min(s.len())].iter().cloned()).collect()
}

/// Tokens a model with this pool and feature spec reads from `doc`.
pub fn select_words(doc: &PatentDocument, pool: PoolKind, spec: FeatureSpec) -> Result<Vec<String>> {
    match (pool, spec) {
        (PoolKind::PerSection, FeatureSpec::FirstYPerSection(y)) => {
            let [a, b, c] = Section::ALL.map(|s| tokenize(doc.section(s)));
            Ok(select_per_section([&a, &b, &c], y))
        }
        (PoolKind::PerSection, _) | (_, FeatureSpec::FirstYPerSection(_)) => Err(Error::Config(alloc::format!(
            "pool {} cannot be read with {:?}",
            pool.name(),
            spec
        ))),
        (PoolKind::AllSections, FeatureSpec::FirstX(x)) => Ok(select_first(&tokenize(&doc.all_sections()), x)),
        (single, FeatureSpec::FirstX(x)) => {
            let section = single.section().expect("single-section pool");
            Ok(select_first(&tokenize(doc.section(section)), x))
        }
    }
}

/// Token-to-index map; index 0 is padding and index 1 is the unknown token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: BTreeMap<String, u32>,
}

impl Vocabulary {
    /// Builds from tokens listed in index order, starting after the two reserved rows.
    pub fn from_tokens(tokens: impl IntoIterator<Item = String>) -> Result<Self> {
        let mut v = Vocabulary {
            tokens: vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()],
            index: BTreeMap::new(),
        };
        v.index.insert(PAD_TOKEN.to_string(), PAD);
        v.index.insert(UNK_TOKEN.to_string(), UNK);
        for t in tokens {
            if v.index.contains_key(&t) {
                return Err(Error::Config(alloc::format!("duplicate vocabulary token {t:?}")));
            }
            v.index.insert(t.clone(), v.tokens.len() as u32);
            v.tokens.push(t);
        }
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of `token`, or [`UNK`].
    pub fn index_of(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, index: u32) -> Option<&str> {
        self.tokens.get(index as usize).map(String::as_str)
    }

    /// All tokens in index order, reserved rows included.
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Vocabulary over the training documents only: tokens seen at least
/// `min_count` times, most frequent first, ties broken lexicographically.
pub fn build_vocabulary(train_sequences: &[Vec<String>], min_count: usize) -> Vocabulary {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for seq in train_sequences {
        for t in seq {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    let mut kept: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|&(t, c)| c >= min_count.max(1) && t != PAD_TOKEN && t != UNK_TOKEN)
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    Vocabulary::from_tokens(kept.into_iter().map(|(t, _)| t.to_string())).expect("tokens are distinct")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub doc_id: String,
    pub indices: Vec<u32>,
    pub true_length: usize,
}

/// Maps tokens to indices, truncates to `target_length` and pads the tail with [`PAD`].
pub fn encode(doc_id: &str, tokens: &[String], vocab: &Vocabulary, target_length: usize) -> TokenSequence {
    let mut indices: Vec<u32> = tokens.iter().take(target_length).map(|t| vocab.index_of(t)).collect();
    let true_length = indices.len();
    indices.resize(target_length, PAD);
    TokenSequence {
        doc_id: doc_id.to_string(),
        indices,
        true_length,
    }
}

/// Tokens of the unpadded prefix; unknown positions decode to [`UNK_TOKEN`].
pub fn decode(seq: &TokenSequence, vocab: &Vocabulary) -> Vec<String> {
    seq.indices[..seq.true_length]
        .iter()
        .map(|&i| vocab.token(i).unwrap_or(UNK_TOKEN).to_string())
        .collect()
}
