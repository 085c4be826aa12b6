use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension must be at least 2, got {0}")]
    InvalidDimension(usize),

    #[error("invalid exponent {value}: {reason}")]
    InvalidExponent { value: f64, reason: &'static str },

    #[error("argument {0} lies outside the open interval (-1, 1)")]
    Domain(f64),

    #[error("integrand is not integrable: {0}")]
    Singular(String),

    #[error("exact evaluation supports at most {cap} summands, got {n}; use the Monte Carlo path")]
    CapExceeded { n: usize, cap: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("non-admissible local step: {0}")]
    NonAdmissible(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
