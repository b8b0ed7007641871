//! Accuracy, recall at n and the ensemble improvement table, all as exact rationals.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use num_rational::Ratio;

use crate::ensemble::PredictionRanking;
use crate::error::{Error, Result};

/// Gold label index per document id.
pub type GoldLabels = BTreeMap<String, usize>;

fn gold_of(gold: &GoldLabels, r: &PredictionRanking) -> Result<usize> {
    gold.get(&r.doc_id).copied().ok_or_else(|| Error::MissingGold(r.doc_id.clone()))
}

fn ratio(hits: u64, total: usize) -> Ratio<u64> {
    if total == 0 {
        Ratio::from_integer(0)
    } else {
        Ratio::new(hits, total as u64)
    }
}

/// Share of documents whose top-ranked label is the gold label. Empty input gives 0.
pub fn accuracy(rankings: &[PredictionRanking], gold: &GoldLabels) -> Result<Ratio<u64>> {
    let mut hits = 0;
    for r in rankings {
        if r.order.first() == Some(&gold_of(gold, r)?) {
            hits += 1;
        }
    }
    Ok(ratio(hits, rankings.len()))
}

/// Share of documents whose gold label is among the first `n` ranked labels.
pub fn recall_at_n(rankings: &[PredictionRanking], gold: &GoldLabels, n: usize) -> Result<Ratio<u64>> {
    if n == 0 {
        return Err(Error::InvalidCutoff(n));
    }
    let mut hits = 0;
    for r in rankings {
        let g = gold_of(gold, r)?;
        if r.order.iter().take(n).any(|&l| l == g) {
            hits += 1;
        }
    }
    Ok(ratio(hits, rankings.len()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalReport {
    pub accuracy: Ratio<u64>,
    pub recall_at: BTreeMap<usize, Ratio<u64>>,
    pub num_docs: usize,
    /// Top-1 counts keyed by `(gold, predicted)`.
    pub confusion: BTreeMap<(usize, usize), u64>,
}

impl EvalReport {
    /// Cutoffs reported by the harness.
    pub const DEFAULT_CUTOFFS: [usize; 4] = [1, 3, 5, 10];

    pub fn compute(rankings: &[PredictionRanking], gold: &GoldLabels, cutoffs: &[usize]) -> Result<Self> {
        let accuracy = accuracy(rankings, gold)?;
        let mut recall_at = BTreeMap::new();
        for &n in cutoffs {
            recall_at.insert(n, recall_at_n(rankings, gold, n)?);
        }
        let mut confusion = BTreeMap::new();
        for r in rankings {
            *confusion.entry((gold_of(gold, r)?, r.top())).or_insert(0) += 1;
        }
        Ok(EvalReport {
            accuracy,
            recall_at,
            num_docs: rankings.len(),
            confusion,
        })
    }

    pub fn recall(&self, n: usize) -> Option<Ratio<u64>> {
        self.recall_at.get(&n).copied()
    }
}

/// `value * 100` rounded half away from zero to two decimals, e.g. `"52.73"`.
pub fn percent_2dp(value: Ratio<i128>) -> String {
    let h = round_hundredths(value * Ratio::from_integer(100));
    let sign = if h < 0 { "-" } else { "" };
    let a = h.abs();
    format!("{sign}{}.{:02}", a / 100, a % 100)
}

/// Same rendering for a fraction of documents.
pub fn percent_2dp_u64(value: Ratio<u64>) -> String {
    percent_2dp(widen(value))
}

/// `x` in hundredths, rounded half away from zero.
pub fn round_hundredths(x: Ratio<i128>) -> i128 {
    let scaled = x * Ratio::from_integer(100);
    let (n, d) = (*scaled.numer(), *scaled.denom());
    let q = (2 * n.abs() + d) / (2 * d);
    if n < 0 {
        -q
    } else {
        q
    }
}

pub fn widen(r: Ratio<u64>) -> Ratio<i128> {
    Ratio::new(*r.numer() as i128, *r.denom() as i128)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImprovementRow {
    pub architecture: String,
    pub members: [Ratio<i128>; 3],
    pub mean: Ratio<i128>,
    pub ensemble: Ratio<i128>,
    /// `100 * (ensemble - mean) / mean`; absent when the mean is zero.
    pub improvement_pct: Option<Ratio<i128>>,
}

impl ImprovementRow {
    pub fn new(architecture: impl Into<String>, members: [Ratio<i128>; 3], ensemble: Ratio<i128>) -> Self {
        let mean = (members[0] + members[1] + members[2]) / Ratio::from_integer(3);
        let improvement_pct = if *mean.numer() == 0 {
            None
        } else {
            Some((ensemble - mean) / mean * Ratio::from_integer(100))
        };
        ImprovementRow {
            architecture: architecture.into(),
            members,
            mean,
            ensemble,
            improvement_pct,
        }
    }

    /// Mean accuracy as a percentage with two decimals.
    pub fn mean_pct(&self) -> String {
        percent_2dp(self.mean)
    }

    pub fn improvement_2dp(&self) -> String {
        match self.improvement_pct {
            Some(p) => {
                let h = round_hundredths(p);
                let sign = if h < 0 { "-" } else { "" };
                format!("{sign}{}.{:02}", h.abs() / 100, h.abs() % 100)
            }
            None => "n/a".to_string(),
        }
    }
}

/// One row per architecture from its three member reports and its ensemble report.
pub fn improvement_table(rows: &[(String, [&EvalReport; 3], &EvalReport)]) -> Vec<ImprovementRow> {
    rows.iter()
        .map(|(name, members, ensemble)| {
            ImprovementRow::new(
                name.clone(),
                members.map(|m| widen(m.accuracy)),
                widen(ensemble.accuracy),
            )
        })
        .collect()
}
