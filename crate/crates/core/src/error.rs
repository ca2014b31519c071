use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no proposals")]
    NoProposals,

    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },

    #[error("line {line}: embedding dimension mismatch: expected {expected}, found {found}")]
    DatasetDim {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("line {line}: RoI count mismatch: expected {expected}, found {found}")]
    DatasetK {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("line {line}: non-binary label {value}")]
    NonBinaryLabel { line: usize, value: String },

    #[error("embedding dimension mismatch: model expects {expected}, record has {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("invalid config: {field}: {msg}")]
    InvalidConfig { field: &'static str, msg: String },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("need ≥2 non-anchor RoIs")]
    TooFewRois,

    #[error("AUC undefined: {0}")]
    AucUndefined(&'static str),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(field: &'static str, msg: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field,
            msg: msg.into(),
        }
    }
}
