//! Binary model checkpoints.
//!
//! Layout (little-endian): `b"PENS"`, `u32` version, `u64` header length, UTF-8 JSON
//! header, then one record per tensor until end of file: `u32` name length, name,
//! `u32` rank, `u32` per dimension, row-major `f32` values.

use std::path::Path;

use patclass_core::corpus::IpcSubclass;
use patclass_core::labels::LabelVocabulary;
use patclass_core::model::{ClassifierModel, History, ModelConfig};
use patclass_core::textprep::Vocabulary;
use patclass_core::Tensor;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};
use crate::ingest::write_file;

pub const MAGIC: &[u8; 4] = b"PENS";
pub const VERSION: u32 = 1;
/// Recorded so a reader knows how untrained weights were drawn.
pub const INIT_SCHEME: &str = "glorot_uniform; embeddings uniform(-0.05,0.05); lstm forget bias 1";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    labels: Vec<IpcSubclass>,
    vocabulary: Vec<String>,
    history: History,
    init: String,
}

pub fn encode_checkpoint(model: &ClassifierModel) -> Result<Vec<u8>> {
    let header = Header {
        config: model.config().clone(),
        labels: model.labels().labels().to_vec(),
        vocabulary: model.vocabulary().tokens()[2..].to_vec(),
        history: model.history().clone(),
        init: INIT_SCHEME.to_string(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(json.len() + 16);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, p) in model.params().iter() {
        out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
        out.extend_from_slice(p.name.as_bytes());
        out.extend_from_slice(&(p.value.rank() as u32).to_le_bytes());
        for &d in p.value.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &x in p.value.data() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Format(format!("checkpoint truncated while reading {what} at byte {}", self.at))
        })?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn done(&self) -> bool {
        self.at == self.bytes.len()
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<ClassifierModel> {
    let mut c = Cursor { bytes, at: 0 };
    if c.take(4, "magic")? != MAGIC {
        return Err(Error::Format("not a checkpoint: bad magic".into()));
    }
    let version = c.u32("version")?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version} (reader supports {VERSION})")));
    }
    let len = c.u64("header length")? as usize;
    let header: Header = serde_json::from_slice(c.take(len, "header")?)?;
    let mut tensors = Vec::new();
    while !c.done() {
        let name_len = c.u32("tensor name length")? as usize;
        let name = std::str::from_utf8(c.take(name_len, "tensor name")?)
            .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = c.u32("tensor rank")? as usize;
        let shape = (0..rank).map(|_| c.u32("tensor shape").map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let count: usize = shape.iter().product();
        let raw = c.take(count.checked_mul(4).ok_or_else(|| Error::Format("tensor too large".into()))?, "tensor data")?;
        let data = raw.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes"))).collect();
        tensors.push((name, Tensor::new(&shape, data)?));
    }
    let vocab = Vocabulary::from_tokens(header.vocabulary)?;
    let labels = LabelVocabulary::new(header.labels.iter().copied());
    if labels.labels() != header.labels.as_slice() {
        return Err(Error::Format("checkpoint labels are not sorted and distinct".into()));
    }
    Ok(ClassifierModel::from_parts(header.config, vocab, labels, header.history, tensors)?)
}

pub fn save_checkpoint(model: &ClassifierModel, path: &Path) -> Result<()> {
    write_file(path, &encode_checkpoint(model)?)
}

pub fn load_checkpoint(path: &Path) -> Result<ClassifierModel> {
    decode_checkpoint(&std::fs::read(path).map_err(io_err(path))?)
}
