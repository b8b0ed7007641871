//! Per-label averaging of three section classifiers.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use crate::corpus::{PatentDocument, Section};
use crate::error::{Error, Result};
use crate::labels::LabelVocabulary;
use crate::model::ClassifierModel;
use crate::textprep::{encode, select_words, TokenSequence};

/// Label indices ordered by probability, highest first; equal probabilities keep ascending index order.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRanking {
    pub doc_id: String,
    pub order: Vec<usize>,
    /// Probabilities aligned with `order`, so non-increasing.
    pub probabilities: Vec<f64>,
}

impl PredictionRanking {
    pub fn from_probabilities(doc_id: impl Into<String>, probs: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..probs.len()).collect();
        // stable sort keeps ascending index among equal values
        order.sort_by(|&a, &b| probs[b].partial_cmp(&probs[a]).unwrap_or(core::cmp::Ordering::Equal));
        let probabilities = order.iter().map(|&i| probs[i]).collect();
        PredictionRanking {
            doc_id: doc_id.into(),
            order,
            probabilities,
        }
    }

    pub fn top(&self) -> usize {
        self.order[0]
    }

    /// 1-based rank of `label`, if present.
    pub fn position_of(&self, label: usize) -> Option<usize> {
        self.order.iter().position(|&l| l == label).map(|p| p + 1)
    }
}

/// `(p1[c] + p2[c] + p3[c]) / 3`, summed in f64 so three equal f32 inputs give that input back exactly.
pub fn combine(p1: &[f32], p2: &[f32], p3: &[f32]) -> Result<Vec<f64>> {
    if p1.len() != p2.len() {
        return Err(Error::LengthMismatch(p1.len(), p2.len()));
    }
    if p1.len() != p3.len() {
        return Err(Error::LengthMismatch(p1.len(), p3.len()));
    }
    Ok(p1
        .iter()
        .zip(p2)
        .zip(p3)
        .map(|((&a, &b), &c)| (a as f64 + b as f64 + c as f64) / 3.0)
        .collect())
}

/// Three trained classifiers sharing one label vocabulary. Each member reads the
/// pool and word selection it was trained with.
#[derive(Debug, Clone)]
pub struct EnsembleModel {
    members: [ClassifierModel; 3],
}

impl EnsembleModel {
    pub fn new(members: [ClassifierModel; 3]) -> Result<Self> {
        let labels = members[0].labels();
        for m in &members[1..] {
            if m.labels() != labels {
                return Err(Error::Config("ensemble members disagree on the label vocabulary".into()));
            }
        }
        Ok(EnsembleModel { members })
    }

    pub fn members(&self) -> &[ClassifierModel; 3] {
        &self.members
    }

    pub fn labels(&self) -> &LabelVocabulary {
        self.members[0].labels()
    }

    fn encode_for(member: &ClassifierModel, doc: &PatentDocument) -> Result<TokenSequence> {
        let cfg = member.config();
        let needed: &[Section] = match cfg.pool.section() {
            Some(s) => match s {
                Section::TitleAbstract => &[Section::TitleAbstract],
                Section::Description => &[Section::Description],
                Section::Claims => &[Section::Claims],
            },
            None => &Section::ALL,
        };
        for &s in needed {
            if doc.section(s).trim().is_empty() {
                return Err(Error::MissingSection {
                    doc_id: doc.doc_id.clone(),
                    section: s.name(),
                });
            }
        }
        let words = select_words(doc, cfg.pool, cfg.feature)?;
        Ok(encode(&doc.doc_id, &words, member.vocabulary(), cfg.sequence_length()))
    }

    pub fn predict(&self, doc: &PatentDocument) -> Result<PredictionRanking> {
        let mut rankings = self.predict_batch(core::slice::from_ref(doc))?;
        Ok(rankings.remove(0))
    }

    /// Same as mapping [`EnsembleModel::predict`] over `docs`; members run batched.
    pub fn predict_batch(&self, docs: &[PatentDocument]) -> Result<Vec<PredictionRanking>> {
        let mut outputs: Vec<Vec<Vec<f32>>> = Vec::with_capacity(3);
        for member in &self.members {
            let seqs = docs
                .iter()
                .map(|d| {
                    Self::encode_for(member, d).map_err(|e| Error::Document {
                        doc_id: d.doc_id.clone(),
                        source: Box::new(e),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            outputs.push(member.predict_proba(&seqs)?);
        }
        docs.iter()
            .enumerate()
            .map(|(i, d)| {
                let avg = combine(&outputs[0][i], &outputs[1][i], &outputs[2][i])?;
                Ok(PredictionRanking::from_probabilities(d.doc_id.clone(), &avg))
            })
            .collect()
    }
}

/// Ranking of one standalone classifier's probability vector.
pub fn rank_member(doc_id: &str, probs: &[f32]) -> PredictionRanking {
    let p: Vec<f64> = probs.iter().map(|&x| x as f64).collect();
    PredictionRanking::from_probabilities(doc_id, &p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combine_arithmetic() {
        assert_eq!(combine(&[1.0, 0.0], &[0.0, 1.0], &[0.0, 1.0]).unwrap(), [1.0 / 3.0, 2.0 / 3.0]);
        let avg = combine(&[0.6, 0.4], &[0.1, 0.9], &[0.2, 0.8]).unwrap();
        assert!((avg[0] - 0.3).abs() < 1e-7 && (avg[1] - 0.7).abs() < 1e-7);
        assert_eq!(PredictionRanking::from_probabilities("d", &avg).top(), 1);
    }

    #[test]
    fn combine_is_idempotent_bitwise() {
        let p = [0.1f32, 0.7, 0.2, 1.0 / 3.0];
        let out = combine(&p, &p, &p).unwrap();
        for (o, &x) in out.iter().zip(&p) {
            assert_eq!(*o, x as f64);
        }
    }

    #[test]
    fn combine_rejects_length_mismatch() {
        assert_eq!(combine(&[0.5, 0.5], &[1.0], &[0.5, 0.5]).unwrap_err(), Error::LengthMismatch(2, 1));
    }

    #[test]
    fn ties_go_to_lower_index() {
        let r = PredictionRanking::from_probabilities("d", &[0.5, 0.5]);
        assert_eq!(r.order, [0, 1]);
        let r = PredictionRanking::from_probabilities("d", &[0.2, 0.4, 0.2, 0.2]);
        assert_eq!(r.order, [1, 0, 2, 3]);
        assert_eq!(r.position_of(3), Some(4));
    }
}
