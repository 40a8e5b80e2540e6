use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed line {line}: {message}")]
    MalformedLine { line: usize, message: String },

    #[error("unknown label at line {line}: {token:?}")]
    UnknownLabel { line: usize, token: String },

    #[error("dimension mismatch at line {line}: expected {expected}, found {found}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("out-of-vocabulary keyword {0:?}")]
    OutOfVocabulary(String),

    #[error("feature length {found} does not match model input dimension {expected}")]
    InputDimension { expected: usize, found: usize },

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("document {0:?} has no gold label")]
    MissingGoldLabel(String),

    #[error("non-differentiable loss {0}")]
    NonDifferentiable(&'static str),

    #[error("loss {0} is not symmetric; use the general decomposition check instead")]
    NotSymmetric(&'static str),

    #[error("non-finite risk at epoch {epoch}, step {step}: {value}")]
    NonFiniteRisk {
        epoch: usize,
        step: usize,
        value: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid {kind} file: {message}")]
    Format { kind: &'static str, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }

    pub(crate) fn format(kind: &'static str, message: impl Into<String>) -> Self {
        Error::Format {
            kind,
            message: message.into(),
        }
    }
}
