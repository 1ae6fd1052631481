use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown kernel family `{0}`")]
    UnknownKernel(String),
    #[error("unknown initial datum `{0}`")]
    UnknownInitial(String),
    #[error("unsupported dimension {dim} for {what}")]
    Dimension { dim: usize, what: &'static str },
    #[error("invalid parameter `{key}`: {reason}")]
    Parameter { key: String, reason: String },
    #[error("normalization violated: {0}")]
    Normalization(String),
    #[error("grid: {0}")]
    Grid(String),
    #[error("grid metadata mismatch")]
    GridMismatch,
    #[error("domain too small: {0}")]
    DomainTooSmall(String),
    #[error("outside the admissible domain: {0}")]
    Domain(String),
    #[error("refused: {0}")]
    Refused(String),
    #[error("fit precondition: {0}")]
    Fit(String),
    #[error("insufficient resolution: {0}")]
    Resolution(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param_err(key: &str, reason: impl Into<String>) -> Error {
    Error::Parameter { key: key.to_string(), reason: reason.into() }
}
