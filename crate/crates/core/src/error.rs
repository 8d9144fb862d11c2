//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A scenario or parameter file failed validation. Names the offending
    /// field and the constraint it violated.
    #[error("invalid configuration: {field}: {message}")]
    Validation { field: String, message: String },

    /// Mutually-exclusive or missing configuration (e.g. noise density and
    /// temperature both set, stochastic fading without an RNG).
    #[error("configuration error: {0}")]
    Config(String),

    /// An argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// K-means was asked for more clusters than there are distinct points.
    #[error("k-means: {requested} clusters requested but only {distinct} distinct user positions")]
    DuplicateCentroids { requested: usize, distinct: usize },

    /// A ground user has no UAV within communication range.
    #[error("infeasible coverage: ground user {user} has no UAV within range")]
    InfeasibleCoverage { user: usize },

    /// The scenario cannot satisfy a structural constraint.
    #[error("infeasible scenario: {0}")]
    Infeasible(String),

    /// A caller broke an API contract (e.g. a deviation audit over a
    /// multi-player diff).
    #[error("contract violation: {0}")]
    ContractViolation(String),

    /// Retrieval over an empty index or with an out-of-range k.
    #[error("retrieval error: {0}")]
    Retrieval(String),

    /// A remote backend could not be reached after retries.
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { message: String, attempts: u32 },

    /// A remote backend answered, but the payload failed parsing or
    /// validation. The raw body is attached for diagnosis.
    #[error("invalid backend response: {message}; raw body: {body}")]
    InvalidResponse { message: String, body: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}
