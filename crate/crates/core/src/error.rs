use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("line {line}, column {column}: cannot parse {value:?} as a number")]
    NonNumeric {
        line: u64,
        column: String,
        value: String,
    },

    #[error("duplicate gene id {0:?}")]
    DuplicateGene(String),

    #[error("duplicate condition id {0:?}")]
    DuplicateCondition(String),

    #[error("every gene has at least one missing value; nothing left to cluster")]
    NoCompleteGenes,

    #[error("matrix contains {0} missing cells; drop incomplete genes first")]
    MissingValues(usize),

    #[error("gene {gene:?}: {reason}")]
    DegenerateGene { gene: String, reason: String },

    #[error("condition {condition:?}: {reason}")]
    DegenerateCondition { condition: String, reason: String },

    #[error("unknown gene id {0:?}")]
    UnknownGene(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{0}")]
    InvalidInput(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
