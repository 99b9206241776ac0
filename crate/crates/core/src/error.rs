use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension {0}: only d = 3 and d = 4 are supported")]
    InvalidDimension(usize),
    #[error("too few nodes: {0} (need at least 16)")]
    TooFewNodes(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("field is identically zero")]
    ZeroField,
    #[error("energy {0} lies above the threshold level; outside the domain of the inverse curve")]
    DomainViolation(f64),
    #[error("non-finite values produced at t = {0}")]
    NonFinite(f64),
    #[error("time {0} is not a sampled checkpoint")]
    UnsampledTime(f64),
    #[error("record has no stored field checkpoints")]
    NoCheckpoints,
    #[error("hypothesis not satisfied: {0}")]
    HypothesisFailure(String),
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("grid quality: {0}")]
    GridQuality(String),
}

pub type Result<T> = std::result::Result<T, Error>;
