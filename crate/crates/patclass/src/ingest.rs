//! Reading patent corpora from the XML tag subset or JSONL, and writing JSONL.

use std::io::Write;
use std::path::Path;

use patclass_core::corpus::{PatentDocument, RawRecord};
use quick_xml::events::Event;
use quick_xml::Reader;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Xml,
    Jsonl,
}

impl Format {
    /// `.xml` is XML, everything else JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("xml") => Format::Xml,
            _ => Format::Jsonl,
        }
    }
}

pub fn parse_corpus(path: &Path, format: Format) -> Result<Vec<RawRecord>> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    match format {
        Format::Xml => parse_xml(&text),
        Format::Jsonl => parse_jsonl(&text),
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Field {
    Title,
    Abstract,
    Description,
    Claims,
    Main,
}

impl Field {
    fn from_tag(tag: &[u8]) -> Option<Self> {
        Some(match tag {
            b"invention-title" => Field::Title,
            b"abstract" => Field::Abstract,
            b"description" => Field::Description,
            b"claims" => Field::Claims,
            b"main-classification" => Field::Main,
            _ => return None,
        })
    }
}

#[derive(Default)]
struct Builder {
    doc_id: String,
    title: Option<String>,
    abstract_: Option<String>,
    description: Option<String>,
    claims: Option<String>,
    main: Option<String>,
}

impl Builder {
    fn slot(&mut self, field: Field) -> &mut Option<String> {
        match field {
            Field::Title => &mut self.title,
            Field::Abstract => &mut self.abstract_,
            Field::Description => &mut self.description,
            Field::Claims => &mut self.claims,
            Field::Main => &mut self.main,
        }
    }

    fn finish(self) -> RawRecord {
        let clean = |s: Option<String>| s.map(|t| t.trim().to_string()).unwrap_or_default();
        let title = clean(self.title);
        let abstract_ = clean(self.abstract_);
        let title_abstract = match (title.is_empty(), abstract_.is_empty()) {
            (false, false) => format!("{title} {abstract_}"),
            (false, true) => title,
            _ => abstract_,
        };
        RawRecord {
            doc_id: self.doc_id,
            title_abstract,
            description: clean(self.description),
            claims: clean(self.claims),
            main_classification: self.main.map(|m| m.trim().to_string()),
        }
    }
}

/// Nested markup inside a section is flattened with a space at each element boundary.
fn push_boundary(buf: &mut String) {
    if !buf.is_empty() && !buf.ends_with(char::is_whitespace) {
        buf.push(' ');
    }
}

/// Parses every `<patent-document ucid="...">` element. Unknown tags are skipped;
/// the first occurrence of a repeated field wins.
pub fn parse_xml(text: &str) -> Result<Vec<RawRecord>> {
    let mut reader = Reader::from_str(text);
    let mut records = Vec::new();
    let mut doc: Option<Builder> = None;
    // field being captured and its element depth relative to the field's own tag
    let mut capture: Option<(Field, usize)> = None;
    let mut depth = 0usize;
    let xml_err = |offset: u64, message: String| Error::Xml { offset, message };
    loop {
        let before = reader.buffer_position();
        let event = reader
            .read_event()
            .map_err(|e| xml_err(reader.error_position(), e.to_string()))?;
        match event {
            Event::Start(e) => {
                depth += 1;
                let name = e.name();
                if let Some((field, nested)) = capture.as_mut() {
                    *nested += 1;
                    let field = *field;
                    if let Some(b) = doc.as_mut() {
                        push_boundary(b.slot(field).get_or_insert_with(String::new));
                    }
                } else if name.as_ref() == b"patent-document" {
                    if doc.is_some() {
                        return Err(xml_err(before, "nested <patent-document>".into()));
                    }
                    let ucid = e
                        .try_get_attribute("ucid")
                        .map_err(|err| xml_err(before, err.to_string()))?
                        .ok_or_else(|| xml_err(before, "<patent-document> without ucid".into()))?;
                    let id = ucid
                        .unescape_value()
                        .map_err(|err| xml_err(before, err.to_string()))?
                        .into_owned();
                    doc = Some(Builder {
                        doc_id: id,
                        ..Builder::default()
                    });
                } else if let (Some(b), Some(field)) = (doc.as_mut(), Field::from_tag(name.as_ref())) {
                    if b.slot(field).is_none() {
                        *b.slot(field) = Some(String::new());
                        capture = Some((field, 0));
                    }
                }
            }
            Event::Empty(e) => {
                let name = e.name();
                if let Some((field, _)) = capture {
                    if let Some(b) = doc.as_mut() {
                        push_boundary(b.slot(field).get_or_insert_with(String::new));
                    }
                } else if let (Some(b), Some(field)) = (doc.as_mut(), Field::from_tag(name.as_ref())) {
                    b.slot(field).get_or_insert_with(String::new);
                }
            }
            Event::End(e) => {
                depth = depth.saturating_sub(1);
                match capture.as_mut() {
                    Some((_, 0)) => capture = None,
                    Some((field, nested)) => {
                        *nested -= 1;
                        let field = *field;
                        if let Some(b) = doc.as_mut() {
                            push_boundary(b.slot(field).get_or_insert_with(String::new));
                        }
                    }
                    None => {
                        if e.name().as_ref() == b"patent-document" {
                            if let Some(b) = doc.take() {
                                records.push(b.finish());
                            }
                        }
                    }
                }
            }
            Event::Text(t) => {
                if let (Some((field, _)), Some(b)) = (capture, doc.as_mut()) {
                    let s = t.unescape().map_err(|err| xml_err(before, err.to_string()))?;
                    b.slot(field).get_or_insert_with(String::new).push_str(&s);
                }
            }
            Event::CData(t) => {
                if let (Some((field, _)), Some(b)) = (capture, doc.as_mut()) {
                    let s = String::from_utf8_lossy(&t);
                    b.slot(field).get_or_insert_with(String::new).push_str(&s);
                }
            }
            Event::Eof => {
                if depth > 0 || doc.is_some() {
                    return Err(xml_err(reader.buffer_position(), "unexpected end of input inside an element".into()));
                }
                break;
            }
            _ => {}
        }
    }
    Ok(records)
}

/// One corpus line. `main_label` may be absent or null for unlabelled records.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JsonDocument {
    pub doc_id: String,
    pub title_abstract: String,
    pub description: String,
    pub claims: String,
    #[serde(default)]
    pub main_label: Option<String>,
}

impl From<JsonDocument> for RawRecord {
    fn from(d: JsonDocument) -> Self {
        RawRecord {
            doc_id: d.doc_id,
            title_abstract: d.title_abstract,
            description: d.description,
            claims: d.claims,
            main_classification: d.main_label,
        }
    }
}

impl From<&RawRecord> for JsonDocument {
    fn from(r: &RawRecord) -> Self {
        JsonDocument {
            doc_id: r.doc_id.clone(),
            title_abstract: r.title_abstract.clone(),
            description: r.description.clone(),
            claims: r.claims.clone(),
            main_label: r.main_classification.clone(),
        }
    }
}

/// Blank lines are skipped; errors carry 1-based line numbers.
pub fn parse_jsonl(text: &str) -> Result<Vec<RawRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str::<JsonDocument>(l)
                .map(RawRecord::from)
                .map_err(|e| Error::Line {
                    line: i + 1,
                    message: e.to_string(),
                })
        })
        .collect()
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut out = Vec::new();
    for row in rows {
        serde_json::to_writer(&mut out, &row)?;
        out.push(b'\n');
    }
    write_file(path, &out)
}

pub fn write_records(path: &Path, records: &[RawRecord]) -> Result<()> {
    write_jsonl(path, records.iter().map(JsonDocument::from))
}

pub fn write_documents(path: &Path, docs: &[PatentDocument]) -> Result<()> {
    write_jsonl(path, docs.iter().map(|d| JsonDocument::from(&d.clone().into_record())))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut f = std::fs::File::create(path).map_err(io_err(path))?;
    f.write_all(bytes).map_err(io_err(path))
}

pub(crate) fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE: &str = r#"<corpus>
<patent-document ucid="EP-1">
  <invention-title>Gear box</invention-title>
  <abstract>A box.</abstract>
  <description><p>First</p><p>second</p></description>
  <claims>1. A gear &amp; box.</claims>
  <main-classification>G06F 17/30</main-classification>
  <bibliographic><unknown>x</unknown></bibliographic>
</patent-document>
</corpus>"#;

    #[test]
    fn parses_minimal_document() {
        let r = parse_xml(ONE).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].doc_id, "EP-1");
        assert_eq!(r[0].title_abstract, "Gear box A box.");
        assert_eq!(r[0].description, "First second");
        assert_eq!(r[0].claims, "1. A gear & box.");
        assert_eq!(r[0].main_classification.as_deref(), Some("G06F 17/30"));
    }

    #[test]
    fn missing_label_and_empty_claims() {
        let xml = r#"<patent-document ucid="X"><abstract>a</abstract><description>d</description><claims/></patent-document>"#;
        let r = parse_xml(xml).unwrap();
        assert!(!r[0].is_labeled());
        assert_eq!(r[0].claims, "");
        assert_eq!(r[0].title_abstract, "a");
    }

    #[test]
    fn unclosed_element_reports_offset() {
        let xml = r#"<patent-document ucid="X"><abstract>a</abstract>"#;
        match parse_xml(xml).unwrap_err() {
            Error::Xml { offset, .. } => assert_eq!(offset, xml.len() as u64),
            e => panic!("{e}"),
        }
        assert!(matches!(parse_xml("<a><b></a>").unwrap_err(), Error::Xml { .. }));
    }

    #[test]
    fn jsonl_round_trip() {
        let recs = parse_xml(ONE).unwrap();
        let text: String = recs
            .iter()
            .map(|r| serde_json::to_string(&JsonDocument::from(r)).unwrap() + "\n")
            .collect();
        assert_eq!(parse_jsonl(&text).unwrap(), recs);
        let err = parse_jsonl("\n{bad").unwrap_err();
        assert!(matches!(err, Error::Line { line: 2, .. }));
    }
}
