use thiserror::Error;

use crate::belief::FactorId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("belief layouts differ")]
    LayoutMismatch,

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("unknown factor {0:?}")]
    UnknownFactor(FactorId),

    #[error("value {value} out of range for factor {factor:?} (dimension {dim})")]
    ValueOutOfRange { factor: FactorId, value: usize, dim: usize },

    #[error("null information has no marginal")]
    NullInformation,

    /// The transmitted marginal puts mass on an event the human rules out.
    #[error("information contradicts the human's support on factor {0:?}")]
    UnsupportedUpdate(FactorId),

    #[error("observation has zero probability under the current belief")]
    ZeroProbabilityObservation,

    #[error("no acting plan found: {0}")]
    PlanningFailure(String),

    #[error("problem too large for exact solution: {0}")]
    TooLarge(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
