//! Patent records, admission filtering, section pools, splits and word statistics.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use num_rational::Ratio;
use rand::seq::SliceRandom;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::seed;
use crate::textprep::tokenize;

/// IPC sub-class code such as `G06F`: section letter A-H, two digits, capital letter.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IpcSubclass([u8; 4]);

impl IpcSubclass {
    /// Parses exactly four characters.
    pub fn parse(code: &str) -> Result<Self> {
        let b = code.as_bytes();
        let valid = b.len() == 4
            && (b'A'..=b'H').contains(&b[0])
            && b[1].is_ascii_digit()
            && b[2].is_ascii_digit()
            && b[3].is_ascii_uppercase();
        if !valid {
            return Err(Error::InvalidLabel(code.to_string()));
        }
        Ok(IpcSubclass([b[0], b[1], b[2], b[3]]))
    }

    /// Reads the sub-class out of a full main-classification string, dropping
    /// group and subgroup (`"G06F 17/30"` becomes `G06F`).
    pub fn from_classification(raw: &str) -> Result<Self> {
        let trimmed = raw.trim();
        match trimmed.char_indices().nth(4) {
            Some((end, _)) => Self::parse(&trimmed[..end]),
            None => Self::parse(trimmed),
        }
    }

    pub fn as_str(&self) -> &str {
        core::str::from_utf8(&self.0).expect("validated ASCII")
    }
}

impl fmt::Display for IpcSubclass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for IpcSubclass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "IpcSubclass({})", self.as_str())
    }
}

impl Serialize for IpcSubclass {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for IpcSubclass {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        IpcSubclass::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// A parsed document before admission; `main_classification` is `None` when the tag was absent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecord {
    pub doc_id: String,
    pub title_abstract: String,
    pub description: String,
    pub claims: String,
    pub main_classification: Option<String>,
}

impl RawRecord {
    pub fn is_labeled(&self) -> bool {
        self.main_classification.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatentDocument {
    pub doc_id: String,
    pub title_abstract: String,
    pub description: String,
    pub claims: String,
    pub main_label: IpcSubclass,
}

impl PatentDocument {
    pub fn section(&self, section: Section) -> &str {
        match section {
            Section::TitleAbstract => &self.title_abstract,
            Section::Description => &self.description,
            Section::Claims => &self.claims,
        }
    }

    /// Title-abstract, description and claims joined by single spaces.
    pub fn all_sections(&self) -> String {
        let mut s = String::with_capacity(self.title_abstract.len() + self.description.len() + self.claims.len() + 2);
        s.push_str(&self.title_abstract);
        s.push(' ');
        s.push_str(&self.description);
        s.push(' ');
        s.push_str(&self.claims);
        s
    }

    pub fn into_record(self) -> RawRecord {
        RawRecord {
            doc_id: self.doc_id,
            title_abstract: self.title_abstract,
            description: self.description,
            claims: self.claims,
            main_classification: Some(self.main_label.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Section {
    TitleAbstract,
    Description,
    Claims,
}

impl Section {
    pub const ALL: [Section; 3] = [Section::TitleAbstract, Section::Description, Section::Claims];

    pub fn name(self) -> &'static str {
        match self {
            Section::TitleAbstract => "title_abstract",
            Section::Description => "description",
            Section::Claims => "claims",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }
}

/// Which text a model reads from each document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolKind {
    AllSections,
    TitleAbstract,
    Description,
    Claims,
    /// The section triple, for first-Y-per-section selection.
    PerSection,
}

impl PoolKind {
    pub const ALL: [PoolKind; 5] = [
        PoolKind::AllSections,
        PoolKind::TitleAbstract,
        PoolKind::Description,
        PoolKind::Claims,
        PoolKind::PerSection,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PoolKind::AllSections => "all_sections",
            PoolKind::TitleAbstract => "title_abstract",
            PoolKind::Description => "description",
            PoolKind::Claims => "claims",
            PoolKind::PerSection => "per_section",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn section(self) -> Option<Section> {
        match self {
            PoolKind::TitleAbstract => Some(Section::TitleAbstract),
            PoolKind::Description => Some(Section::Description),
            PoolKind::Claims => Some(Section::Claims),
            _ => None,
        }
    }
}

impl core::str::FromStr for PoolKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::from_name(s).ok_or_else(|| Error::Config(alloc::format!("unknown pool {s:?}")))
    }
}

impl fmt::Display for PoolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl core::str::FromStr for Section {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::from_name(s).ok_or_else(|| Error::Config(alloc::format!("unknown section {s:?}")))
    }
}

impl fmt::Display for Section {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl From<Section> for PoolKind {
    fn from(s: Section) -> Self {
        match s {
            Section::TitleAbstract => PoolKind::TitleAbstract,
            Section::Description => PoolKind::Description,
            Section::Claims => PoolKind::Claims,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PoolText {
    Single(String),
    Sections([String; 3]),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolEntry {
    pub doc_id: String,
    pub main_label: IpcSubclass,
    pub text: PoolText,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectionPool {
    pub kind: PoolKind,
    pub entries: Vec<PoolEntry>,
}

/// Keeps labelled records whose three sections are all non-blank, in input order.
/// Main classifications are truncated to the sub-class; a repeated `doc_id` keeps its first occurrence.
pub fn filter_admitted(records: &[RawRecord]) -> Vec<PatentDocument> {
    let mut seen = BTreeSet::new();
    records
        .iter()
        .filter_map(|r| {
            let label = IpcSubclass::from_classification(r.main_classification.as_deref()?).ok()?;
            let complete = [&r.title_abstract, &r.description, &r.claims]
                .iter()
                .all(|s| !s.trim().is_empty());
            if !complete || !seen.insert(r.doc_id.as_str()) {
                return None;
            }
            Some(PatentDocument {
                doc_id: r.doc_id.clone(),
                title_abstract: r.title_abstract.clone(),
                description: r.description.clone(),
                claims: r.claims.clone(),
                main_label: label,
            })
        })
        .collect()
}

pub fn build_pools(docs: &[PatentDocument]) -> BTreeMap<PoolKind, SectionPool> {
    PoolKind::ALL
        .into_iter()
        .map(|kind| {
            let entries = docs
                .iter()
                .map(|d| PoolEntry {
                    doc_id: d.doc_id.clone(),
                    main_label: d.main_label,
                    text: match kind {
                        PoolKind::AllSections => PoolText::Single(d.all_sections()),
                        PoolKind::PerSection => {
                            PoolText::Sections([d.title_abstract.clone(), d.description.clone(), d.claims.clone()])
                        }
                        single => PoolText::Single(d.section(single.section().expect("mono pool")).to_string()),
                    },
                })
                .collect();
            (kind, SectionPool { kind, entries })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

/// Round-half-up of `num * n / den` in integers.
fn rounded_share(n: usize, num: usize, den: usize) -> usize {
    (2 * num * n + den) / (2 * den)
}

/// Seeded Fisher-Yates shuffle, then an 80/10/10 cut (test takes the remainder).
pub fn split(doc_ids: &[String], seed: u64) -> Result<SplitManifest> {
    let n = doc_ids.len();
    if n < 10 {
        return Err(Error::TooFewDocuments(n));
    }
    let mut order: Vec<String> = doc_ids.to_vec();
    order.shuffle(&mut seed::rng(seed));
    let n_train = rounded_share(n, 8, 10);
    let n_val = rounded_share(n, 1, 10);
    let test = order.split_off(n_train + n_val);
    let validation = order.split_off(n_train);
    Ok(SplitManifest {
        seed,
        train: order,
        validation,
        test,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WordStats {
    pub min: usize,
    pub max: usize,
    pub mean: Ratio<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectionStats {
    pub title_abstract: WordStats,
    pub description: WordStats,
    pub claims: WordStats,
}

impl SectionStats {
    pub fn get(&self, section: Section) -> &WordStats {
        match section {
            Section::TitleAbstract => &self.title_abstract,
            Section::Description => &self.description,
            Section::Claims => &self.claims,
        }
    }
}

fn word_stats(counts: impl Iterator<Item = usize>) -> WordStats {
    let (mut min, mut max, mut total, mut n) = (usize::MAX, 0, 0u64, 0u64);
    for c in counts {
        min = min.min(c);
        max = max.max(c);
        total += c as u64;
        n += 1;
    }
    if n == 0 {
        return WordStats {
            min: 0,
            max: 0,
            mean: Ratio::from_integer(0),
        };
    }
    WordStats {
        min,
        max,
        mean: Ratio::new(total, n),
    }
}

/// Token-count statistics per section, counted with [`tokenize`].
pub fn section_stats(docs: &[PatentDocument]) -> SectionStats {
    let stats = |s: Section| word_stats(docs.iter().map(|d| tokenize(d.section(s)).len()));
    SectionStats {
        title_abstract: stats(Section::TitleAbstract),
        description: stats(Section::Description),
        claims: stats(Section::Claims),
    }
}
