use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid model or run configuration.
    #[error("configuration error: {0}")]
    Config(String),
    /// An argument outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Not enough data for the requested statistics.
    #[error("statistics error: {0}")]
    Statistics(String),
    /// A factorization or inversion that broke down.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// A proven a-priori bound was exceeded; carries the witness.
    #[error("bound violated: {0}")]
    BoundViolation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
