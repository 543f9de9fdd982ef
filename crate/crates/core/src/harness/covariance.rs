//! Monte-Carlo rate of the empirical covariance of i.i.d. samples.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::GaussianSpec;
use crate::linalg::psd_sqrt;
use crate::measures::covariance_of;
use crate::rng::Stream;

use super::rate::{fit_log_rate, RateFit, RatePoint};
use super::stats::Accumulator;
use super::ExperimentRow;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceRateReport {
    /// `E‖C(μ^J) − C(μ)‖_F^p` per `J`.
    pub estimates: Vec<RatePoint>,
    pub fit: RateFit,
    /// `E‖√C(μ^J) − √C(μ)‖_F^p` per `J`, when requested.
    pub sqrt_estimates: Option<Vec<RatePoint>>,
    pub sqrt_fit: Option<RateFit>,
    pub replicates: usize,
}

impl CovarianceRateReport {
    pub fn rows(&self, p: f64) -> Vec<ExperimentRow> {
        let mut rows: Vec<ExperimentRow> = self
            .estimates
            .iter()
            .map(|e| ExperimentRow::from_point("cov_rate", p, e, self.replicates, 0))
            .collect();
        if let Some(sq) = &self.sqrt_estimates {
            rows.extend(
                sq.iter()
                    .map(|e| ExperimentRow::from_point("cov_sqrt_rate", p, e, self.replicates, 0)),
            );
        }
        rows
    }
}

/// Draws `M` independent `J`-samples from `rho0` for each `J` and estimates
/// the `p`-th moment of the Frobenius error of the empirical covariance
/// (divisor `J`). Sample `k` of trial `m` at size `J` is keyed by `(J, m, k)`.
pub fn covariance_mc_rate(
    rho0: &GaussianSpec,
    p: f64,
    j_values: &[usize],
    replicates: usize,
    seed: u64,
    with_sqrt: bool,
) -> Result<CovarianceRateReport> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::invalid(format!("p must be ≥ 1, got {p}")));
    }
    if replicates < 2 {
        return Err(Error::invalid("replicates must be ≥ 2"));
    }
    if j_values.contains(&0) {
        return Err(Error::invalid("j_values must be positive"));
    }
    if with_sqrt {
        rho0.require_nondegenerate()?;
    }
    let d = rho0.dim();
    let law = rho0.sampler()?;
    let target = &rho0.cov;
    let target_root = psd_sqrt(target)?;

    let mut plain = Vec::with_capacity(j_values.len());
    let mut rooted = Vec::with_capacity(j_values.len());
    for &j in j_values {
        let per_trial: Vec<(f64, f64)> = (0..replicates as u64)
            .into_par_iter()
            .map(|m| {
                let mut points = vec![0.0; j * d];
                let key = ((j as u64) << 32) | m;
                for (k, row) in points.chunks_mut(d).enumerate() {
                    law.sample_into(seed, Stream::CovarianceSamples, key, k as u64, row);
                }
                let (_, cov) = covariance_of(d, &points);
                let e = cov.sub(target).frobenius_norm().powf(p);
                let s = if with_sqrt {
                    psd_sqrt(&cov)?.sub(&target_root).frobenius_norm().powf(p)
                } else {
                    0.0
                };
                Ok((e, s))
            })
            .collect::<Result<_>>()?;
        let a: Accumulator = per_trial.iter().map(|v| v.0).collect();
        plain.push(RatePoint {
            j,
            estimate: a.mean(),
            stderr: a.stderr(),
        });
        if with_sqrt {
            let b: Accumulator = per_trial.iter().map(|v| v.1).collect();
            rooted.push(RatePoint {
                j,
                estimate: b.mean(),
                stderr: b.stderr(),
            });
        }
    }
    let fit = fit_log_rate(&plain)?;
    let (sqrt_estimates, sqrt_fit) = if with_sqrt {
        let f = fit_log_rate(&rooted)?;
        (Some(rooted), Some(f))
    } else {
        (None, None)
    };
    Ok(CovarianceRateReport {
        estimates: plain,
        fit,
        sqrt_estimates,
        sqrt_fit,
        replicates,
    })
}
