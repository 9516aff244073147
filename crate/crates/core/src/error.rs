//! Error type shared across the crate.

use thiserror::Error;

/// Errors raised by estimators, environments and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A matrix or vector dimension does not match what the operation expects.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// Invalid configuration value (non-positive noise, bad grid order, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// A filter quantity that must stay positive collapsed numerically.
    #[error("numerical degeneracy: {0}")]
    Degenerate(String),

    /// A linear solve failed or the system is too ill-conditioned to trust.
    #[error("linear solve failed (condition estimate {condition:.3e})")]
    Solver { condition: f64 },

    /// Input data failed validation (non-stochastic matrix, state inside a barrier, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// Attempted to reuse a checkpoint that does not fit the target task.
    #[error("incompatible checkpoint: {0}")]
    IncompatibleCheckpoint(String),

    /// Checkpoint or task file could not be decoded.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
