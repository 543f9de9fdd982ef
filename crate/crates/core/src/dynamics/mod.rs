//! Time integration of the interacting ensemble and its mean-field limit.
//!
//! The interacting particle system (IPS) evolves
//!
//! ```text
//! dX^j = −C(μ^J_t) ∇φ(X^j) dt + √(2 C(μ^J_t)) dW^j,
//! ```
//!
//! with `μ^J_t` the empirical measure of the ensemble. The mean-field
//! particles `X̄^j` use the same equation with `C(μ^J_t)` replaced by the
//! deterministic covariance path `t ↦ C(ρ̄_t)`. Coupled runs start both
//! systems from the same draw and feed them the same Brownian increments.
//!
//! Integration is explicit Euler–Maruyama with the covariance frozen at the
//! left endpoint of each step.

mod monitor;
mod path;
mod picard;
mod step;
mod trajectory;

pub use monitor::{stopping_monitor, MonitorKind, MonitorTag, StoppingMonitor, StoppingRecord};
pub use path::{gaussian_meanfield_path, uniform_grid, CovariancePath, PathCoefficients};
pub use picard::{picard_covariance_path, PicardOptions, PicardOutcome};
pub use step::{diffusion, drift, step_coupled, step_ips, step_meanfield};
pub use trajectory::{run_coupled_trajectory, run_ips, TrajectoryObserver, TrajectorySummary};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::EmpiricalMeasure;
use crate::rng::Stream;

/// Positions of `J` particles in `R^dim` at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleState {
    pub time: f64,
    pub dim: usize,
    /// Row-major `J × dim`.
    pub positions: Vec<f64>,
}

impl EnsembleState {
    pub fn new(time: f64, dim: usize, positions: Vec<f64>) -> Result<Self> {
        if dim == 0 || positions.is_empty() || !positions.len().is_multiple_of(dim) {
            return Err(Error::invalid("positions must be a non-empty J × dim array"));
        }
        if positions.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("positions must be finite"));
        }
        if !(time >= 0.0) {
            return Err(Error::invalid("time must be non-negative"));
        }
        Ok(Self { time, dim, positions })
    }

    pub fn n_particles(&self) -> usize {
        self.positions.len() / self.dim
    }

    pub fn particle(&self, j: usize) -> &[f64] {
        &self.positions[j * self.dim..(j + 1) * self.dim]
    }

    pub fn measure(&self) -> EmpiricalMeasure {
        EmpiricalMeasure::from_positions(self.dim, self.positions.clone())
    }
}

/// IPS and mean-field ensembles advanced in lockstep on shared noise.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledEnsembles {
    pub ips: EnsembleState,
    pub meanfield: EnsembleState,
    pub step_index: u64,
}

impl CoupledEnsembles {
    /// Both systems start from the same positions at time 0.
    pub fn from_initial(dim: usize, positions: Vec<f64>) -> Result<Self> {
        let ips = EnsembleState::new(0.0, dim, positions)?;
        Ok(Self {
            meanfield: ips.clone(),
            ips,
            step_index: 0,
        })
    }
}

/// Step size, horizon, and randomness for one SDE run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdeConfig {
    pub dt: f64,
    pub t_final: f64,
    pub seed: u64,
    /// Covariance eigenvalue floor; runs report when it binds.
    pub cov_floor: f64,
    /// Brownian sub-increments summed per step (see [`crate::rng::NoiseSource`]).
    #[serde(default = "one")]
    pub noise_substeps: u32,
}

fn one() -> u32 {
    1
}

impl SdeConfig {
    pub fn new(dt: f64, t_final: f64, seed: u64) -> Result<Self> {
        let cfg = Self {
            dt,
            t_final,
            seed,
            cov_floor: crate::linalg::DEFAULT_INVERSION_FLOOR,
            noise_substeps: 1,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("sde.dt must be positive"));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::invalid("sde.t_final must be positive"));
        }
        if !(self.cov_floor >= 0.0) {
            return Err(Error::invalid("sde.cov_floor must be non-negative"));
        }
        let ratio = self.t_final / self.dt;
        if ratio > u32::MAX as f64 {
            return Err(Error::invalid("sde.t_final / sde.dt exceeds the step counter range"));
        }
        if (ratio - ratio.round()).abs() > 1e-6 * ratio.max(1.0) {
            return Err(Error::invalid("sde.t_final must be an integer multiple of sde.dt"));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn time_at(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }

    /// Same run on a grid `factor` times finer, sharing the Brownian path.
    pub fn refined(&self, factor: u32) -> Result<Self> {
        if factor == 0 || !self.noise_substeps.is_multiple_of(factor) {
            return Err(Error::invalid(format!(
                "refinement by {factor} needs noise_substeps divisible by it (have {})",
                self.noise_substeps
            )));
        }
        Ok(Self {
            dt: self.dt / f64::from(factor),
            noise_substeps: self.noise_substeps / factor,
            ..*self
        })
    }

    pub(crate) fn noise(&self, replicate: u64) -> crate::rng::NoiseSource {
        crate::rng::NoiseSource::new(self.seed, Stream::Increments, replicate).with_substeps(self.noise_substeps)
    }
}
