use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the lab.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid layer sizes {0:?}: need exactly three positive widths")]
    LayerSizes(Vec<usize>),
    #[error("layer index {index} out of range (network has {layers} weight layers)")]
    LayerIndex { index: usize, layers: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("zero vector where a nonzero vector is required")]
    ZeroVector,
    #[error("sample too short: need more than {window} entries, got {len}")]
    TooShort { window: usize, len: usize },
    #[error("sample too small for a t-test: need at least 2 entries, got {0}")]
    SampleTooSmall(usize),
    #[error("invalid config field `{field}`: {reason}")]
    Config { field: &'static str, reason: String },
    #[error("unknown rehearsal mode `{0}` (expected one of: none, fr-output, fr-all, batch)")]
    UnknownMode(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Config {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors that come from the filesystem rather than from inputs.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
