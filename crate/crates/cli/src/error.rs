use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config line {line}, `{key}`: {reason}")]
    Config { line: usize, key: String, reason: String },

    #[error("config: {0}")]
    Invalid(String),

    #[error("step {step}: {reason}")]
    Numeric { step: u64, reason: String },

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },

    #[error(transparent)]
    Library(#[from] flatopt::Error),
}

impl CliError {
    pub fn config(line: usize, key: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Config { line, key: key.into(), reason: reason.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// 2 for configuration and validation, 3 for numeric failure, 4 for I/O.
    pub fn exit_code(&self) -> i32 {
        use flatopt::Error as E;
        match self {
            CliError::Config { .. } | CliError::Invalid(_) => 2,
            CliError::Numeric { .. } => 3,
            CliError::Io { .. } => 4,
            CliError::Library(e) => match e {
                E::Io { .. } | E::WrongMagic { .. } | E::Truncated { .. } | E::CountMismatch { .. } => 4,
                E::Parse { .. } | E::RaggedRow { .. } | E::LabelOutOfRange { .. } => 4,
                E::NonFinite | E::ZeroGradient | E::ZeroGradientTrace => 3,
                _ => 2,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
