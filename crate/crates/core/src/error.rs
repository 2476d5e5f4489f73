//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Logits stopped being finite, usually a sign of parameter blow-up.
    #[error("non-finite logits: parameter blow-up")]
    NonFiniteLogits,

    /// A log-probability was requested for a token with exactly zero mass.
    #[error("token {0} has zero probability")]
    ZeroProbability(usize),

    /// Statistically degenerate input (zero variance, empty support, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Invalid configuration.
    #[error("config error: {0}")]
    Config(String),

    /// Numeric failure during training (non-finite gradient or reward).
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Checkpoint file problems: bad magic, truncation, dimension mismatch.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// Dataset file problems.
    #[error("dataset error: {0}")]
    Dataset(String),

    /// An exact-enumeration request exceeded the configured bound.
    #[error("enumeration bound exceeded: {0}")]
    EnumerationBound(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
