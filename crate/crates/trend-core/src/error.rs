//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by tensor algebra, model fitting and the pipelines.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes of two operands are inconsistent.
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    /// An argument is outside its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArg(String),

    /// A NaN or infinity reached an operation that requires finite input.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// Input is structurally unusable (all-missing fiber, single class, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// An iterative numeric procedure failed (e.g. SVD did not converge).
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Malformed external data (CSV/JSON schema violations, bad headers).
    #[error("data error: {0}")]
    Data(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used by the CLI to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Usage / argument problems.
    Usage,
    /// Malformed or inconsistent data.
    Data,
    /// Numeric failures inside algorithms.
    Numeric,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidArg(_) => ErrorClass::Usage,
            Error::DimMismatch(_) | Error::Data(_) | Error::Io(_) | Error::Csv(_)
            | Error::Json(_) => ErrorClass::Data,
            Error::NonFinite(_) | Error::Degenerate(_) | Error::Numeric(_) => ErrorClass::Numeric,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
