//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("manifest {path}: line {line}: {message}")]
    ManifestParse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("manifest {path}: duplicate video_id `{video_id}` (line {line})")]
    DuplicateVideoId {
        path: PathBuf,
        video_id: String,
        line: u64,
    },

    #[error("decode {path}: {message}")]
    Decode { path: PathBuf, message: String },

    #[error("encode {path}: {message}")]
    Encode { path: PathBuf, message: String },

    #[error("feature cache: {0}")]
    Cache(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: String,
    },

    #[error("backend `{backend}`: {message}")]
    Backend { backend: String, message: String },

    #[error("training: {0}")]
    Train(String),

    #[error("evaluation: {0}")]
    Eval(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
