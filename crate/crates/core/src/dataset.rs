//! Turns admitted documents and a split manifest into encoded training data for one model.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::corpus::{PatentDocument, PoolKind, SplitManifest};
use crate::error::{Error, Result};
use crate::labels::LabelVocabulary;
use crate::model::LabeledSequence;
use crate::textprep::{build_vocabulary, encode, select_words, FeatureSpec, Vocabulary};

#[derive(Debug, Clone)]
pub struct PreparedData {
    pub vocab: Vocabulary,
    pub labels: LabelVocabulary,
    pub train: Vec<LabeledSequence>,
    pub validation: Vec<LabeledSequence>,
    pub test: Vec<LabeledSequence>,
}

/// Label vocabulary over every admitted document, so test labels always have a slot.
pub fn label_vocabulary(docs: &[PatentDocument]) -> LabelVocabulary {
    LabelVocabulary::new(docs.iter().map(|d| d.main_label))
}

/// Looks up each manifest id among `docs`, keeping manifest order.
pub fn resolve<'a>(docs: &'a [PatentDocument], ids: &[String]) -> Result<Vec<&'a PatentDocument>> {
    let by_id: BTreeMap<&str, &PatentDocument> = docs.iter().map(|d| (d.doc_id.as_str(), d)).collect();
    ids.iter()
        .map(|id| by_id.get(id.as_str()).copied().ok_or_else(|| Error::MissingGold(id.clone())))
        .collect()
}

/// Selects words per `pool`/`feature`, builds the vocabulary from the training split
/// only and encodes every split to the feature's fixed length.
pub fn prepare(
    docs: &[PatentDocument],
    manifest: &SplitManifest,
    pool: PoolKind,
    feature: FeatureSpec,
    min_count: usize,
) -> Result<PreparedData> {
    feature.validate()?;
    let labels = label_vocabulary(docs);
    let select = |ids: &[String]| -> Result<Vec<(&PatentDocument, Vec<String>)>> {
        resolve(docs, ids)?
            .into_iter()
            .map(|d| Ok((d, select_words(d, pool, feature)?)))
            .collect()
    };
    let train_words = select(&manifest.train)?;
    let vocab = build_vocabulary(
        &train_words.iter().map(|(_, w)| w.clone()).collect::<Vec<_>>(),
        min_count,
    );
    let len = feature.sequence_length();
    let encode_all = |items: Vec<(&PatentDocument, Vec<String>)>| -> Result<Vec<LabeledSequence>> {
        items
            .into_iter()
            .map(|(d, words)| {
                Ok(LabeledSequence {
                    sequence: encode(&d.doc_id, &words, &vocab, len),
                    label: labels.index_of(d.main_label)?,
                })
            })
            .collect()
    };
    let validation = encode_all(select(&manifest.validation)?)?;
    let test = encode_all(select(&manifest.test)?)?;
    let train = encode_all(train_words)?;
    Ok(PreparedData {
        vocab,
        labels,
        train,
        validation,
        test,
    })
}
