use thiserror::Error;

/// Error surface shared across the crate.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid completion: {0}")]
    InvalidCompletion(String),

    #[error("image error: {0}")]
    Image(String),

    #[error("tokenizer error: {0}")]
    Tokenizer(String),

    #[error("statistics error: {0}")]
    Stats(String),

    #[error("serialization error: {0}")]
    Serialization(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
