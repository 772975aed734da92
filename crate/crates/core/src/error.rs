use thiserror::Error;

/// Errors raised by model construction, field evaluation and the oracles.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A configuration value violates a model constraint. The message names
    /// the constraint, e.g. `1 < L0`.
    #[error("configuration error: constraint `{constraint}` violated ({detail})")]
    Config { constraint: String, detail: String },

    /// A point lies outside the domain of a coordinate map or field.
    #[error("domain error: {0}")]
    Domain(String),

    /// Marker data is internally inconsistent (e.g. unsorted positions).
    #[error("internal consistency error: {0}")]
    Internal(String),

    /// An oracle could not produce a trustworthy answer.
    #[error("oracle failure: {0}")]
    Oracle(String),
}

impl Error {
    pub fn config(constraint: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Config { constraint: constraint.into(), detail: detail.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
