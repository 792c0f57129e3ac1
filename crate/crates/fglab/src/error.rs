//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("zero-norm vector where a direction is required ({context})")]
    ZeroVector { context: &'static str },

    #[error("non-finite value encountered ({context})")]
    NonFinite { context: &'static str },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("truncated SVD did not converge after {iterations} iterations")]
    SvdNoConvergence { iterations: usize },

    #[error("IDX magic mismatch in {path}: expected {expected:#010x}, found {found:#010x}")]
    IdxMagicMismatch {
        path: String,
        expected: u32,
        found: u32,
    },

    #[error("IDX file {path} is truncated: need {needed} bytes, have {have}")]
    IdxTruncated {
        path: String,
        needed: usize,
        have: usize,
    },

    #[error("IDX image/label count mismatch: {images} images vs {labels} labels")]
    IdxCountMismatch { images: usize, labels: usize },

    #[error("infeasible partition: {0}")]
    InfeasiblePartition(String),

    #[error("clustering produced an empty group (group {group_id})")]
    EmptyGroup { group_id: usize },

    #[error("not enough clients: need {needed}, have {have}")]
    InsufficientClients { needed: usize, have: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
