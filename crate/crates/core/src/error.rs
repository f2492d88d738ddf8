//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed caller input (dimension mismatch, bad tolerance, unknown name, ...).
    #[error("invalid input: {0}")]
    Input(String),

    /// A model object violates its invariants (infeasible transition row, ...).
    #[error("model error: {0}")]
    Model(String),

    /// A solver failed or an internal consistency check tripped.
    #[error("solver error: {0}")]
    Solver(String),

    /// Configuration file problems, reported with a field path where possible.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn model(msg: impl Into<String>) -> Self {
        Error::Model(msg.into())
    }

    pub fn solver(msg: impl Into<String>) -> Self {
        Error::Solver(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
