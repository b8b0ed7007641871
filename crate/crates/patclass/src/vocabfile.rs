//! Vocabulary file: one `token<TAB>index` line per entry, reserved rows included.

use std::path::Path;

use patclass_core::textprep::{Vocabulary, PAD, PAD_TOKEN, UNK, UNK_TOKEN};

use crate::error::{Error, Result};
use crate::ingest::{read_file, write_file};

pub fn render_vocabulary(vocab: &Vocabulary) -> String {
    vocab
        .tokens()
        .iter()
        .enumerate()
        .map(|(i, t)| format!("{t}\t{i}\n"))
        .collect()
}

/// Indices must be dense from 0 with the padding and unknown rows first.
pub fn parse_vocabulary(text: &str) -> Result<Vocabulary> {
    let mut tokens = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.is_empty()) {
        let err = |message: String| Error::Line { line: i + 1, message };
        let (token, index) = line.rsplit_once('\t').ok_or_else(|| err("missing tab".into()))?;
        let index: usize = index.parse().map_err(|_| err(format!("bad index {index:?}")))?;
        if index != tokens.len() {
            return Err(err(format!("index {index} out of sequence")));
        }
        tokens.push(token.to_string());
    }
    let reserved = [(PAD, PAD_TOKEN), (UNK, UNK_TOKEN)];
    for (idx, name) in reserved {
        if tokens.get(idx as usize).map(String::as_str) != Some(name) {
            return Err(Error::Format(format!("vocabulary row {idx} must be {name}")));
        }
    }
    Ok(Vocabulary::from_tokens(tokens.into_iter().skip(2))?)
}

pub fn save_vocabulary(path: &Path, vocab: &Vocabulary) -> Result<()> {
    write_file(path, render_vocabulary(vocab).as_bytes())
}

pub fn load_vocabulary(path: &Path) -> Result<Vocabulary> {
    parse_vocabulary(&read_file(path)?)
}
