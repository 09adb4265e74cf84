//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("problem too large: {0}")]
    TooLarge(String),

    #[error("basis size {size} exceeds cap {cap}; raise the cap explicitly if intended")]
    BasisTooLarge { size: u128, cap: usize },

    #[error("scenario mismatch: {0}")]
    ScenarioMismatch(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("Gram system is singular: constraint matrices are linearly dependent")]
    SingularGram,
}

pub type Result<T> = std::result::Result<T, Error>;
