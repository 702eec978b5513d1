use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the parser library.
#[derive(Debug, Error)]
pub enum Error {
    /// Layer or tensor sizes do not fit together. Always a programming or
    /// configuration mistake, never a data problem.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An API was called in the wrong order, e.g. backward without a forward pass.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("non-finite gradient in parameter `{0}`")]
    NonFiniteGradient(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("sentence {sentence}: {message}")]
    Tree { sentence: usize, message: String },

    #[error("unsupported checkpoint format version {found} (expected {expected})")]
    FormatVersion { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
