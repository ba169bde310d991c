use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Dimensions, hyperparameters or shapes that do not fit together.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("index {index} out of range (limit {limit})")]
    Index { index: usize, limit: usize },

    /// A caller broke an operation's precondition (empty input, missing gold words, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: invalid UTF-8 at byte offset {offset}")]
    Utf8 { path: PathBuf, offset: usize },

    #[error("corpora are misaligned at sentence {sentence}")]
    Alignment { sentence: usize },

    #[error("model format error: {0}")]
    Format(String),

    #[error("provider fingerprint mismatch: model expects {expected}, provider is {actual}")]
    FingerprintMismatch { expected: String, actual: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
