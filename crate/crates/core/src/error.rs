use std::io;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed commit record at byte {offset}: {message}")]
    Record { offset: usize, message: String },

    #[error("invalid JSON record on line {line}: {source}")]
    JsonRecord {
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error("diff line {line}: {message}")]
    Diff { line: usize, message: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("{0}")]
    Format(String),

    #[error("non-finite loss in epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
