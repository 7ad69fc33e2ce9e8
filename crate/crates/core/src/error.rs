use thiserror::Error;

/// Errors raised by the geometric and quantum operations in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid tangent vector: components sum to {0:e}, expected 0")]
    InvalidTangent(f64),

    #[error("metric is singular at outcome {index}: p = 0 but dp = {delta:e}")]
    SingularMetric { index: usize, delta: f64 },

    #[error("absolute continuity violated at outcome {index}: p > 0 where the reference assigns 0")]
    AbsoluteContinuityViolation { index: usize },

    #[error("both hypotheses assign zero likelihood to the observed counts")]
    ZeroLikelihoodBoth,

    #[error("counts sum to {actual}, expected {expected} tosses")]
    CountMismatch { expected: u64, actual: u64 },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("event distribution has odd length {0}")]
    OddDimension(usize),

    #[error("gauge convention requires a nonzero slope, got a = {0}")]
    ZeroGaugeSlope(f64),

    #[error("measure check needs at least two grid points, got {0}")]
    EmptyGrid(usize),

    #[error("matrix is not orthogonal: |MᵀM - I|_F = {0:e}")]
    NotOrthogonal(f64),

    #[error("matrix is not unitary: |U†U - I|_F = {0:e}")]
    NotUnitary(f64),

    #[error("transformation has the wrong type: expected {expected}, found {found}")]
    WrongType {
        expected: &'static str,
        found: &'static str,
    },

    #[error("outcome {outcome} has probability {probability:e} and cannot be forced")]
    ImpossibleOutcome { outcome: usize, probability: f64 },

    #[error("outcome index {outcome} out of range for {dim} outcomes")]
    OutcomeOutOfRange { outcome: usize, dim: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}
