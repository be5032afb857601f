use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the optimization library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite vector")]
    NonFinite,

    #[error("empty vector")]
    Empty,

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("zero-gradient perturbation")]
    ZeroGradient,

    #[error("invalid `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },

    #[error("row {row}, column {column}: {reason}")]
    Parse { row: usize, column: usize, reason: String },

    #[error("row {row}: expected {expected} columns, found {found}")]
    RaggedRow { row: usize, expected: usize, found: usize },

    #[error("row {row}, column {column}: label {label} out of range")]
    LabelOutOfRange { row: usize, column: usize, label: String },

    #[error("{}: wrong magic: expected {expected:#010x}, found {found:#010x}", path.display())]
    WrongMagic { path: PathBuf, expected: u32, found: u32 },

    #[error("{}: truncated payload", path.display())]
    Truncated { path: PathBuf },

    #[error("count mismatch: {images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },

    #[error("trace too short: {len} records for k = {k}")]
    TraceTooShort { len: usize, k: usize },

    #[error("zero-gradient trace")]
    ZeroGradientTrace,
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument { name, reason: reason.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
