use alloc::collections::BTreeMap;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::IpcSubclass;
use crate::error::{Error, Result};

/// Sub-class to output-position map, sorted by code so positions are stable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVocabulary {
    labels: Vec<IpcSubclass>,
    index: BTreeMap<IpcSubclass, usize>,
}

impl LabelVocabulary {
    pub fn new(labels: impl IntoIterator<Item = IpcSubclass>) -> Self {
        let mut labels: Vec<IpcSubclass> = labels.into_iter().collect();
        labels.sort();
        labels.dedup();
        let index = labels.iter().enumerate().map(|(i, &l)| (l, i)).collect();
        LabelVocabulary { labels, index }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: IpcSubclass) -> Result<usize> {
        self.index
            .get(&label)
            .copied()
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn label(&self, index: usize) -> Option<IpcSubclass> {
        self.labels.get(index).copied()
    }

    pub fn labels(&self) -> &[IpcSubclass] {
        &self.labels
    }

    /// One-hot row for `label`.
    pub fn one_hot(&self, label: IpcSubclass) -> Result<Vec<f32>> {
        let mut row = vec![0.0; self.len()];
        row[self.index_of(label)?] = 1.0;
        Ok(row)
    }
}
