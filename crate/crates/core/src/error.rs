use thiserror::Error;

use crate::gauss_newton::Trajectory;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is not positive definite: pivot {pivot:e} at row {row} (smallest pivot seen {smallest:e})")]
    NotPositiveDefinite { row: usize, pivot: f64, smallest: f64 },

    #[error("matrix is singular: pivot {pivot:e} at row {row}")]
    Singular { row: usize, pivot: f64 },

    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {residual:e})")]
    KrylovNotConverged { iterations: usize, residual: f64 },

    #[error("non-positive or non-finite transmissibility at node {node} (u = {value})")]
    NonPositiveTransmissibility { node: usize, value: f64 },

    #[error("unsupported Matérn smoothness {0}; supported values are positive integers and 0.5, 1.5, 2.5")]
    UnsupportedSmoothness(f64),

    #[error("Bessel K requires x > 0, got {0}")]
    BesselDomain(f64),

    #[error("covariance factorization failed (jitter {jitter:e}); try a larger jitter")]
    CovarianceFactorization { jitter: f64 },

    #[error("observation-space system lost positive definiteness (alpha {alpha:e})")]
    ObservationSystem { alpha: f64 },

    #[error("reference field has zero norm")]
    ZeroReference,

    #[error("observation stream ended after {got} of {expected} observations")]
    StreamExhausted { expected: usize, got: usize },

    #[error("iteration {iteration} failed: {source}")]
    Aborted {
        iteration: usize,
        #[source]
        source: Box<Error>,
        partial: Box<Trajectory>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("malformed file {path}: {reason}")]
    Format { path: String, reason: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
