use thiserror::Error;

/// Errors raised anywhere in the estimation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("calibration error: {0}")]
    Calibration(String),
    #[error("empty group: decoding requires at least one client")]
    EmptyGroup,
    #[error("variance undefined for a group of {0} client(s)")]
    VarianceUndefined(u64),
    #[error("degenerate binomial with p = {0}")]
    DegenerateDistribution(f64),
    #[error("exact accounting refused for m*n = {0} (limit {limit}); use the approximate accountant", limit = crate::accounting::EXACT_SUPPORT_LIMIT)]
    ExactTooLarge(u64),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
