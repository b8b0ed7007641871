//! Word-vector text format: optional `<count> <dim>` header, then `token v1 .. vdim` per line.

use std::fmt::Write as _;
use std::path::Path;

use patclass_core::embeddings::{EmbeddingTable, TableSource};

use crate::error::{Error, Result};
use crate::ingest::{read_file, write_file};

pub fn load_pretrained(path: &Path) -> Result<EmbeddingTable> {
    parse_word_vectors(&read_file(path)?)
}

fn is_header(line: &str) -> bool {
    let parts: Vec<&str> = line.split_whitespace().collect();
    parts.len() == 2 && parts.iter().all(|p| p.parse::<u64>().is_ok())
}

/// The dimension comes from the first vector line and is enforced on every later line.
pub fn parse_word_vectors(text: &str) -> Result<EmbeddingTable> {
    let mut table: Option<EmbeddingTable> = None;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() || (i == 0 && is_header(line)) {
            continue;
        }
        let err = |message: String| Error::Line { line: line_no, message };
        let mut parts = line.split_whitespace();
        let token = parts.next().expect("non-blank line");
        let vector = parts
            .map(|p| p.parse::<f32>().map_err(|_| err(format!("non-numeric component {p:?}"))))
            .collect::<Result<Vec<f32>>>()?;
        if vector.is_empty() {
            return Err(err(format!("token {token:?} has no components")));
        }
        let t = table.get_or_insert_with(|| EmbeddingTable::new(vector.len(), TableSource::PretrainedFile));
        if vector.len() != t.dim() {
            return Err(err(format!("expected {} components, found {}", t.dim(), vector.len())));
        }
        t.insert(token, vector).map_err(|e| err(e.to_string()))?;
    }
    table.ok_or_else(|| Error::Format("word-vector file holds no vectors".into()))
}

/// Writes a header and one line per token in table order. `f32` values use the
/// shortest representation that parses back to the same bits.
pub fn render_word_vectors(table: &EmbeddingTable) -> String {
    let mut out = format!("{} {}\n", table.len(), table.dim());
    for (token, v) in table.iter() {
        out.push_str(token);
        for x in v {
            write!(out, " {x}").expect("write to String");
        }
        out.push('\n');
    }
    out
}

pub fn save_word_vectors(path: &Path, table: &EmbeddingTable) -> Result<()> {
    write_file(path, render_word_vectors(table).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_optional() {
        let a = parse_word_vectors("a 1 0\nb 0 1\n").unwrap();
        let b = parse_word_vectors("2 2\na 1 0\nb 0 1\n").unwrap();
        assert_eq!(a.dim(), 2);
        assert_eq!(a.get("b"), Some(&[0.0, 1.0][..]));
        assert_eq!(a, b);
    }

    #[test]
    fn dimension_is_enforced() {
        let err = parse_word_vectors("a 1 0\nb 0 1\nc 1 2 3\n").unwrap_err();
        assert!(matches!(err, Error::Line { line: 3, .. }), "{err}");
        assert!(matches!(parse_word_vectors("a 1 x").unwrap_err(), Error::Line { line: 1, .. }));
    }

    #[test]
    fn round_trips_bitwise() {
        let t = parse_word_vectors("a 0.1 -2.5e-7\nb 3.4028235e38 1\n").unwrap();
        assert_eq!(parse_word_vectors(&render_word_vectors(&t)).unwrap(), t);
    }
}
