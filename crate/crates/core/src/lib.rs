//! Ensemble Langevin interacting particle systems, their synchronously
//! coupled mean-field limit, and Monte-Carlo experiments measuring the rate
//! at which the two agree as the ensemble grows.
//!
//! The crate is layered bottom-up:
//!
//! * [`linalg`]: symmetric matrices, PSD square roots, eigenvalue extremes.
//! * [`measures`]: empirical measures and exact Wasserstein distances.
//! * [`potentials`]: the target potentials and their growth-class checks.
//! * [`dynamics`]: Euler–Maruyama stepping, mean-field covariance paths, monitors.
//! * [`harness`]: rate experiments and property suites.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod assignment;
pub mod dynamics;
pub mod error;
pub mod gaussian;
pub mod harness;
pub mod linalg;
pub mod measures;
pub mod potentials;
pub mod rng;

pub use error::{Error, Result};
pub use gaussian::{GaussianSampler, GaussianSpec, InitialLaw};
pub use linalg::SymMatrix;
pub use measures::EmpiricalMeasure;
pub use potentials::Potential;
