use thiserror::Error;

use crate::dynamics::PicardOutcome;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("symmetric eigensolver did not converge")]
    NonConvergedEigen,

    #[error("matrix is not positive semidefinite: eigenvalue {min_eigenvalue:e} below -{clamp:e}")]
    NotPsd { min_eigenvalue: f64, clamp: f64 },

    #[error("minimum eigenvalue {min_eigenvalue:e} is below the floor {floor:e}")]
    BelowFloor { min_eigenvalue: f64, floor: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("support size mismatch: {left} vs {right} points")]
    SizeMismatch { left: usize, right: usize },

    #[error("assignment size {size} exceeds the cap of {cap}")]
    CapExceeded { size: usize, cap: usize },

    #[error("one-dimensional routine called on dimension {0}")]
    DimNotOne(usize),

    #[error("non-finite coordinate after step {step}")]
    NonFinite { step: usize },

    #[error("time {time} lies outside the covariance path [0, {end}]")]
    PathOutOfRange { time: f64, end: f64 },

    #[error("covariance ODE lost positive definiteness at t = {time} (min eigenvalue {min_eigenvalue:e})")]
    OdeStepRejected { time: f64, min_eigenvalue: f64 },

    #[error("fixed-point iteration stopped after {} iterations with gap {:e}", .0.iterations, .0.last_gap())]
    NoConvergence(Box<PicardOutcome>),

    #[error("covariance collapse at t = {time}: min eigenvalue {min_eigenvalue:e} below floor {floor:e}")]
    CovarianceCollapse {
        time: f64,
        min_eigenvalue: f64,
        floor: f64,
    },

    #[error("{failed} of {total} replicates blew up")]
    TooManyFailedReplicates { failed: usize, total: usize },

    #[error("estimate #{index} is not positive ({value})")]
    NonPositiveEstimate { index: usize, value: f64 },

    #[error("observable requires a quadratic potential")]
    UnsupportedObservable,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
