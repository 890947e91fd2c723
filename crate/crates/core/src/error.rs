use std::path::PathBuf;

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("mode {mode} out of range for order-{order} tensor")]
    Mode { mode: usize, order: usize },

    #[error("index out of bounds: {0}")]
    Index(String),

    #[error("non-finite value at offset {0}")]
    NonFinite(usize),

    #[error("invalid rank {rank}: {reason}")]
    Rank { rank: usize, reason: String },

    #[error("SVD failed to converge on mode-{mode} matricization")]
    Svd { mode: usize },

    #[error("corner certificate {certificate} exceeds 1; subgradient would not be certified")]
    InfeasibleSubgradient { certificate: f64 },

    #[error("operation requires an order-3 tensor, got order {0}")]
    UnsupportedOrder(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid file format: {0}")]
    Format(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
