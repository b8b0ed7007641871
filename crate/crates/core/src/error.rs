use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{op}: incompatible shapes {shapes:?}")]
    Shape {
        op: &'static str,
        shapes: Vec<Vec<usize>>,
    },
    #[error("{op}: {detail}")]
    InvalidOperand { op: &'static str, detail: String },
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("index {index} out of range for table with {rows} rows")]
    IndexOutOfRange { index: usize, rows: usize },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("too few documents to split: {0} (need at least 10)")]
    TooFewDocuments(usize),
    #[error("sequence length mismatch: model expects {expected}, got {found}")]
    SequenceLength { expected: usize, found: usize },
    #[error("probability vectors differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid IPC sub-class code {0:?}")]
    InvalidLabel(String),
    #[error("label {0} is not in the label vocabulary")]
    UnknownLabel(String),
    #[error("no gold label for document {0:?}")]
    MissingGold(String),
    #[error("document {doc_id:?} has an empty {section} section")]
    MissingSection {
        doc_id: String,
        section: &'static str,
    },
    #[error("document {doc_id:?}: {source}")]
    Document {
        doc_id: String,
        #[source]
        source: Box<Error>,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("empty token stream")]
    EmptyStream,
    #[error("recall cut-off must be at least 1, got {0}")]
    InvalidCutoff(usize),
}

impl Error {
    pub(crate) fn shape(op: &'static str, shapes: &[&[usize]]) -> Self {
        Error::Shape {
            op,
            shapes: shapes.iter().map(|s| s.to_vec()).collect(),
        }
    }
}
