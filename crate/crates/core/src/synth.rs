//! Synthetic patent corpora with a label-revealing token planted per section.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::{IpcSubclass, RawRecord, Section};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCorpusSpec {
    pub num_docs: usize,
    pub num_labels: usize,
    /// Size of the filler vocabulary `w0 .. w{n-1}`.
    pub filler_vocab: usize,
    /// Chance that a section carries its document's signal token, drawn per section.
    pub p_signal: f64,
    /// Filler words per section, inclusive range.
    pub min_words: usize,
    pub max_words: usize,
    pub seed: u64,
}

impl SyntheticCorpusSpec {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.num_labels < 2 {
            problems.push("num_labels must be at least 2");
        }
        if self.num_labels > 8 * 99 * 26 {
            problems.push("num_labels exceeds the generated code space");
        }
        if self.filler_vocab == 0 {
            problems.push("filler_vocab must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.p_signal) {
            problems.push("p_signal must lie in [0, 1]");
        }
        if self.min_words == 0 || self.min_words > self.max_words {
            problems.push("need 1 <= min_words <= max_words");
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}

/// The `i`-th generated sub-class code: `A01A`, `B01A`, ..., `H01A`, `A02A`, ...
pub fn synthetic_label(i: usize) -> IpcSubclass {
    let section = (b'A' + (i % 8) as u8) as char;
    let class = 1 + (i / 8) % 99;
    let sub = (b'A' + ((i / (8 * 99)) % 26) as u8) as char;
    IpcSubclass::parse(&format!("{section}{class:02}{sub}")).expect("generated code is valid")
}

/// Token planted in a section of a document labelled `label`.
pub fn signal_token(label: IpcSubclass) -> String {
    format!("sigtok_{label}")
}

/// Balanced labels (counts differ by at most one), shuffled. Each section gets
/// `min_words..=max_words` uniform filler words and, with probability `p_signal`,
/// the signal token inserted at a uniform position.
pub fn generate_synthetic(spec: &SyntheticCorpusSpec) -> Result<Vec<RawRecord>> {
    spec.validate()?;
    let mut rng = seed::derived_rng(spec.seed, "synthetic");
    let mut labels: Vec<usize> = (0..spec.num_docs).map(|i| i % spec.num_labels).collect();
    labels.shuffle(&mut rng);
    let width = spec.num_docs.max(1).to_string().len();
    let mut docs = Vec::with_capacity(spec.num_docs);
    for (i, &label) in labels.iter().enumerate() {
        let code = synthetic_label(label);
        let mut sections: [String; 3] = Default::default();
        for (slot, _) in sections.iter_mut().zip(Section::ALL) {
            let n = rng.gen_range(spec.min_words..=spec.max_words);
            let mut words: Vec<String> = (0..n).map(|_| format!("w{}", rng.gen_range(0..spec.filler_vocab))).collect();
            if rng.gen_bool(spec.p_signal) {
                let at = rng.gen_range(0..=words.len());
                words.insert(at, signal_token(code));
            }
            *slot = words.join(" ");
        }
        let [title_abstract, description, claims] = sections;
        docs.push(RawRecord {
            doc_id: format!("SYN{i:0width$}"),
            title_abstract,
            description,
            claims,
            main_classification: Some(code.to_string()),
        });
    }
    Ok(docs)
}
