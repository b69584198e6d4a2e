use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("series tail could not be certified within {max_terms} terms (continuity condition suspect)")]
    Uncertified { max_terms: usize },

    #[error("weights exhausted at index {index} before {wanted} block boundaries formed")]
    WeightsExhausted { index: usize, wanted: usize },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("path horizon {horizon} is shorter than the required {required}")]
    HorizonMismatch { horizon: usize, required: usize },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
