use thiserror::Error;

/// Failure modes of the conversion pipeline and its validators.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dominant eigenvalue condition violated: {0}")]
    DominantEigenvalue(String),

    #[error("positive density condition fails: {0}")]
    PositiveDensity(String),

    #[error("ill-conditioned {what} (condition estimate {condition:.3e})")]
    IllConditioned { what: String, condition: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("representation order {order} exceeds limit {limit}")]
    OrderLimit { order: usize, limit: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
