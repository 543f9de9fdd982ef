//! `L^p` error of ensemble averages `(1/J) Σ f(X^j_t)` against the mean-field
//! expectation, for quadratic potentials where the latter is Gaussian.

use serde::{Deserialize, Serialize};

use crate::dynamics::{gaussian_meanfield_path, run_ips, uniform_grid, SdeConfig};
use crate::error::{Error, Result};
use crate::gaussian::GaussianSpec;
use crate::linalg::SymMatrix;
use crate::potentials::{dot, Potential};

use super::chaos::replicate_outcomes;
use super::rate::{fit_log_rate, RateFit, RatePoint};
use super::stats::Accumulator;
use super::ExperimentRow;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Observable {
    Linear { a: Vec<f64> },
    SquaredNorm,
    Constant { value: f64 },
}

impl Observable {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Observable::Linear { a } => dot(a, x),
            Observable::SquaredNorm => dot(x, x),
            Observable::Constant { value } => *value,
        }
    }

    /// Expectation under `N(mean, cov)`.
    pub fn gaussian_expectation(&self, mean: &[f64], cov: &SymMatrix) -> f64 {
        match self {
            Observable::Linear { a } => dot(a, mean),
            Observable::SquaredNorm => cov.trace() + dot(mean, mean),
            Observable::Constant { value } => *value,
        }
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        match self {
            Observable::Linear { a } if a.len() != dim => Err(Error::DimMismatch {
                expected: dim,
                found: a.len(),
            }),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingErrorEstimate {
    pub j: usize,
    /// `(E|(1/J) Σ f(X^j_t) − ρ̄_t[f]|^p)^{1/p}`
    pub estimate: f64,
    /// Delta-method standard error of the `L^p` norm.
    pub stderr: f64,
    pub n_ok: usize,
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingRateReport {
    pub estimates: Vec<SamplingErrorEstimate>,
    pub fit: RateFit,
    pub reference_value: f64,
}

impl SamplingRateReport {
    pub fn rows(&self, p: f64) -> Vec<ExperimentRow> {
        self.estimates
            .iter()
            .map(|e| ExperimentRow {
                experiment: "sampling_error".into(),
                j: e.j,
                p,
                estimate: e.estimate,
                stderr: e.stderr,
                n_ok: e.n_ok,
                n_failed: e.n_failed,
            })
            .collect()
    }
}

/// Everything an estimate needs besides `J`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingSetup {
    pub potential: Potential,
    pub observable: Observable,
    pub time: f64,
    pub p: f64,
    pub replicates: usize,
    pub sde: SdeConfig,
    pub rho0: GaussianSpec,
}

impl SamplingSetup {
    fn n_steps(&self) -> Result<usize> {
        let ratio = self.time / self.sde.dt;
        if !(self.time >= 0.0) || (ratio - ratio.round()).abs() > 1e-6 * ratio.max(1.0) {
            return Err(Error::invalid("sampling time must be a non-negative multiple of sde.dt"));
        }
        Ok(ratio.round() as usize)
    }

    /// `ρ̄_t[f]` from the Gaussian moment equations.
    pub fn reference_value(&self) -> Result<f64> {
        let Potential::Quadratic { precision, center, .. } = &self.potential else {
            return Err(Error::UnsupportedObservable);
        };
        self.observable.check_dim(self.potential.dim())?;
        let n = self.n_steps()?;
        if n == 0 {
            return Ok(self.observable.gaussian_expectation(&self.rho0.mean, &self.rho0.cov));
        }
        let path = gaussian_meanfield_path(precision, center, &self.rho0.mean, &self.rho0.cov, &uniform_grid(self.sde.dt, n))?;
        let node = path.node(n);
        Ok(self.observable.gaussian_expectation(&node.mean, &node.cov))
    }

    fn validate(&self) -> Result<()> {
        self.sde.validate()?;
        if self.rho0.dim() != self.potential.dim() {
            return Err(Error::DimMismatch {
                expected: self.potential.dim(),
                found: self.rho0.dim(),
            });
        }
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(Error::invalid(format!("p must be ≥ 1, got {}", self.p)));
        }
        if self.replicates < 2 {
            return Err(Error::invalid("replicates must be ≥ 2"));
        }
        Ok(())
    }
}

fn estimate_with_reference(setup: &SamplingSetup, reference: f64, j: usize) -> Result<SamplingErrorEstimate> {
    if j == 0 {
        return Err(Error::invalid("J must be ≥ 1"));
    }
    let n = setup.n_steps()?;
    let law = setup.rho0.sampler()?;
    let (errors, n_failed) = replicate_outcomes(setup.replicates, |rep| {
        let mu = run_ips(&setup.potential, &law, j, &setup.sde, rep, n)?;
        let avg = mu.points().map(|x| setup.observable.eval(x)).sum::<f64>() / j as f64;
        Ok((avg - reference).abs().powf(setup.p))
    })?;
    let acc: Accumulator = errors.iter().copied().collect();
    let m = acc.mean();
    let estimate = m.powf(1.0 / setup.p);
    let stderr = if m > 0.0 {
        estimate / (setup.p * m) * acc.stderr()
    } else {
        0.0
    };
    Ok(SamplingErrorEstimate {
        j,
        estimate,
        stderr,
        n_ok: errors.len(),
        n_failed,
    })
}

pub fn sampling_error(setup: &SamplingSetup, j: usize) -> Result<SamplingErrorEstimate> {
    setup.validate()?;
    estimate_with_reference(setup, setup.reference_value()?, j)
}

pub fn sampling_error_rate(setup: &SamplingSetup, j_values: &[usize]) -> Result<SamplingRateReport> {
    setup.validate()?;
    let reference = setup.reference_value()?;
    let estimates = j_values
        .iter()
        .map(|&j| estimate_with_reference(setup, reference, j))
        .collect::<Result<Vec<_>>>()?;
    let fit = fit_log_rate(
        &estimates
            .iter()
            .map(|e| RatePoint {
                j: e.j,
                estimate: e.estimate,
                stderr: e.stderr,
            })
            .collect::<Vec<_>>(),
    )?;
    Ok(SamplingRateReport {
        estimates,
        fit,
        reference_value: reference,
    })
}
