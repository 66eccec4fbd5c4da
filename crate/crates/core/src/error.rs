//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by model construction, inference, and forecasting.
#[derive(Debug, Error)]
pub enum CtarError {
    /// Bad data fed to an operation (non-finite sample, short series, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Invalid or inconsistent configuration (thresholds, priors, dimensions).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A tree violates structural requirements (propriety, depth bound).
    #[error("structural error: {0}")]
    Structure(String),

    /// A numerical routine failed or produced an inconsistent value.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// An enumeration guard was exceeded.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// Hyperparameter tuning could not produce a usable candidate.
    #[error("tuning failed: {0}")]
    Tuning(String),
}

pub type Result<T> = std::result::Result<T, CtarError>;
