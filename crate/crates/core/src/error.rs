//! Error types shared by the whole crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("state error: {0}")]
    State(String),

    #[error("adaptation error: non-finite gradient on channel {channel}")]
    NonFiniteGradient { channel: usize },

    #[error("normalization error: {0}")]
    Normalization(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("ingestion error for {path}: {reason}")]
    Ingestion { path: String, reason: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
