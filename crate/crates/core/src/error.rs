use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, LexError>;

#[derive(Debug, Error)]
pub enum LexError {
    #[error("invalid word {0:?}: must be non-empty and must not contain '#'")]
    InvalidWord(String),
    #[error("duplicate entry {0:?}")]
    DuplicateEntry(String),
    #[error("empty lexicon")]
    EmptyLexicon,
    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("cosine similarity undefined for a zero vector")]
    ZeroVector,
    #[error("correlation undefined for a constant vector")]
    ConstantVector,
    #[error("empty table")]
    EmptyTable,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("solver failed: {reason} (residual norm {residual})")]
    Solver { reason: String, residual: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("trials out of order for subject {subject}: order {order} follows {previous}")]
    Unsorted {
        subject: String,
        order: u64,
        previous: u64,
    },
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: bad mapping container: {msg}")]
    Container { path: PathBuf, msg: String },
    #[error("model comparison requires identical rows (n = {expected} vs {got})")]
    MismatchedRows { expected: usize, got: usize },
}

impl LexError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LexError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: u64, msg: impl Into<String>) -> Self {
        LexError::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
