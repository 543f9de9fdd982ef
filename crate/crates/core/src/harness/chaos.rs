//! Propagation-of-chaos rate experiments: `E[sup_t |X^j_t − X̄^j_t|^p]` as a
//! function of the ensemble size.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    gaussian_meanfield_path, picard_covariance_path, run_coupled_trajectory, uniform_grid, CovariancePath,
    MonitorKind, PicardOptions, PicardOutcome, SdeConfig, TrajectoryObserver, TrajectorySummary,
};
use crate::error::{Error, Result};
use crate::gaussian::{GaussianSampler, GaussianSpec};
use crate::potentials::Potential;

use super::rate::{fit_log_rate, RateFit, RatePoint};
use super::stats::Accumulator;
use super::ExperimentRow;

/// Parameters of the fixed-point path solver used for non-quadratic potentials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicardSettings {
    pub n_particles: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for PicardSettings {
    fn default() -> Self {
        Self {
            n_particles: 100_000,
            max_iter: 30,
            tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateExperimentConfig {
    pub potential: Potential,
    pub p: f64,
    pub j_values: Vec<usize>,
    pub replicates: usize,
    pub sde: SdeConfig,
    pub rho0: GaussianSpec,
    pub picard: PicardSettings,
}

impl RateExperimentConfig {
    pub fn dim(&self) -> usize {
        self.potential.dim()
    }

    pub fn validate(&self) -> Result<()> {
        self.sde.validate()?;
        if self.rho0.dim() != self.dim() {
            return Err(Error::DimMismatch {
                expected: self.dim(),
                found: self.rho0.dim(),
            });
        }
        self.rho0.require_nondegenerate()?;
        if self.j_values.len() < 3 {
            return Err(Error::invalid("j_values needs at least 3 entries for a slope fit"));
        }
        if self.j_values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("j_values must be strictly increasing"));
        }
        if self.j_values[0] < 2 {
            return Err(Error::invalid("j_values must all be ≥ 2"));
        }
        if self.replicates == 0 {
            return Err(Error::invalid("replicates must be ≥ 1"));
        }
        if !(self.p >= 2.0 && self.p.is_finite()) {
            return Err(Error::invalid(format!("p must be ≥ 2, got {}", self.p)));
        }
        Ok(())
    }
}

/// The mean-field path a rate experiment compares against.
#[derive(Debug, Clone)]
pub struct MeanFieldReference {
    pub path: CovariancePath,
    /// Present when the path came from the fixed-point solver.
    pub picard: Option<PicardOutcome>,
}

/// Closed-form moment ODE for quadratic potentials, fixed-point solver otherwise.
pub fn meanfield_reference(cfg: &RateExperimentConfig) -> Result<MeanFieldReference> {
    let grid = uniform_grid(cfg.sde.dt, cfg.sde.n_steps());
    match &cfg.potential {
        Potential::Quadratic { precision, center, .. } => Ok(MeanFieldReference {
            path: gaussian_meanfield_path(precision, center, &cfg.rho0.mean, &cfg.rho0.cov, &grid)?,
            picard: None,
        }),
        Potential::EvenPower { .. } => {
            let law = cfg.rho0.sampler()?;
            let mut opts = PicardOptions::new(cfg.picard.n_particles, cfg.picard.max_iter, cfg.picard.tol, cfg.sde.seed);
            opts.cov_floor = cfg.sde.cov_floor;
            let outcome = picard_covariance_path(&cfg.potential, &law, &grid, &opts)?;
            Ok(MeanFieldReference {
                path: outcome.path.clone(),
                picard: Some(outcome),
            })
        }
    }
}

/// Result of one ensemble size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosEstimate {
    pub j: usize,
    pub estimate: f64,
    pub stderr: f64,
    pub n_ok: usize,
    pub n_failed: usize,
    /// Replicates in which the ensemble covariance dipped below `sde.cov_floor`.
    pub cov_floor_hits: usize,
}

/// Runs `count` replicates in parallel and returns their outcomes in
/// replicate order, with blow-ups separated from hard errors.
pub(crate) fn replicate_outcomes<T: Send>(
    count: usize,
    f: impl Fn(u64) -> Result<T> + Sync,
) -> Result<(Vec<T>, usize)> {
    // `f` is Sync but not Send; the closure borrows it.
    #[allow(clippy::redundant_closure)]
    let results: Vec<Result<T>> = (0..count as u64).into_par_iter().map(|r| f(r)).collect();
    let mut ok = Vec::with_capacity(count);
    let mut failed = 0;
    for r in results {
        match r {
            Ok(v) => ok.push(v),
            Err(Error::NonFinite { .. }) => failed += 1,
            Err(e) => return Err(e),
        }
    }
    // more than 1% of replicates lost
    if failed * 100 > count {
        return Err(Error::TooManyFailedReplicates { failed, total: count });
    }
    Ok((ok, failed))
}

/// Mean over replicates and particles of `sup_t |X^j_t − X̄^j_t|^p`.
pub fn estimate_chaos_error(cfg: &RateExperimentConfig, reference: &CovariancePath, j: usize) -> Result<ChaosEstimate> {
    struct Silent;
    impl TrajectoryObserver for Silent {
        fn observe(&mut self, _: usize, _: f64, _: &[f64], _: &[f64]) {}
    }
    Ok(estimate_chaos_error_observed(cfg, reference, j, |_| None::<Silent>)?.0)
}

/// As [`estimate_chaos_error`], attaching the observer `make(replicate)` to
/// each replicate that gets one. Observers come back in replicate order.
pub fn estimate_chaos_error_observed<O: TrajectoryObserver + Send>(
    cfg: &RateExperimentConfig,
    reference: &CovariancePath,
    j: usize,
    make: impl Fn(u64) -> Option<O> + Sync,
) -> Result<(ChaosEstimate, Vec<O>)> {
    if j < 2 {
        return Err(Error::invalid("chaos error needs J ≥ 2"));
    }
    let law: GaussianSampler = cfg.rho0.sampler()?;
    let (summaries, n_failed) = replicate_outcomes(cfg.replicates, |rep| {
        let mut obs = make(rep);
        let s: TrajectorySummary = run_coupled_trajectory(
            &cfg.potential,
            reference,
            &law,
            j,
            &cfg.sde,
            rep,
            &[],
            obs.as_mut().map(|o| o as &mut dyn TrajectoryObserver),
        )?;
        let value = s.sup_displacement.iter().map(|g| g.powf(cfg.p)).sum::<f64>() / j as f64;
        Ok((value, s.cov_floor_hit, obs))
    })?;
    let acc: Accumulator = summaries.iter().map(|s| s.0).collect();
    let estimate = ChaosEstimate {
        j,
        estimate: acc.mean(),
        stderr: acc.stderr(),
        n_ok: summaries.len(),
        n_failed,
        cov_floor_hits: summaries.iter().filter(|s| s.1).count(),
    };
    Ok((estimate, summaries.into_iter().filter_map(|s| s.2).collect()))
}

#[derive(Debug, Clone)]
pub struct ChaosRateReport {
    pub estimates: Vec<ChaosEstimate>,
    pub fit: RateFit,
    pub reference: MeanFieldReference,
}

impl ChaosRateReport {
    pub fn rows(&self, experiment: &str, p: f64) -> Vec<ExperimentRow> {
        self.estimates
            .iter()
            .map(|e| ExperimentRow {
                experiment: experiment.to_string(),
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

/// Estimates the chaos error at every `J` and fits the log-log slope.
pub fn run_chaos_rate(cfg: &RateExperimentConfig) -> Result<ChaosRateReport> {
    cfg.validate()?;
    let reference = meanfield_reference(cfg)?;
    let estimates = cfg
        .j_values
        .iter()
        .map(|&j| estimate_chaos_error(cfg, &reference.path, j))
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
    Ok(ChaosRateReport {
        estimates,
        fit,
        reference,
    })
}

/// Slopes of the base run and of the same run at `dt / 2`.
///
/// The base run sums two Brownian sub-increments per step, so both runs see
/// the same Brownian path and the slope shift isolates the time-stepping bias.
#[derive(Debug, Clone)]
pub struct DtHalvingCheck {
    pub base: ChaosRateReport,
    pub halved: ChaosRateReport,
}

impl DtHalvingCheck {
    pub fn slope_shift(&self) -> f64 {
        (self.halved.fit.slope - self.base.fit.slope).abs()
    }

    /// Shift below the base fit's slope standard error.
    pub fn passes(&self) -> bool {
        self.slope_shift() < self.base.fit.slope_stderr
    }
}

pub fn dt_halving_check(cfg: &RateExperimentConfig) -> Result<DtHalvingCheck> {
    let mut base_cfg = cfg.clone();
    base_cfg.sde.noise_substeps = cfg.sde.noise_substeps * 2;
    let mut halved_cfg = base_cfg.clone();
    halved_cfg.sde = base_cfg.sde.refined(2)?;
    Ok(DtHalvingCheck {
        base: run_chaos_rate(&base_cfg)?,
        halved: run_chaos_rate(&halved_cfg)?,
    })
}

/// Per-`J` trigger frequencies of the IPS and mean-field excursion monitors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcursionFrequency {
    pub j: usize,
    pub ips: f64,
    pub ips_stderr: f64,
    pub meanfield: f64,
    pub meanfield_stderr: f64,
    pub n_ok: usize,
    pub n_failed: usize,
}

/// `R = factor · (E sup_t |X̄_t|^r)^{1/r}` with the expectation estimated from
/// a pilot run of `n_pilot` mean-field particles.
pub fn calibrate_radius(
    cfg: &RateExperimentConfig,
    reference: &CovariancePath,
    r: f64,
    n_pilot: usize,
    factor: f64,
) -> Result<f64> {
    let law = cfg.rho0.sampler()?;
    let pilot = run_coupled_trajectory(&cfg.potential, reference, &law, n_pilot, &cfg.sde, u64::MAX, &[], None)?;
    let moment = pilot.meanfield_sup_norm.iter().map(|v| v.powf(r)).sum::<f64>() / n_pilot as f64;
    Ok(factor * moment.powf(1.0 / r))
}

/// Frequencies with which `τ_J(R)` and `τ̄_J(R)` fall inside `[0, T]`.
pub fn excursion_decay_experiment(
    cfg: &RateExperimentConfig,
    reference: &CovariancePath,
    r: f64,
    radius: f64,
) -> Result<Vec<ExcursionFrequency>> {
    let law = cfg.rho0.sampler()?;
    let monitors = [
        MonitorKind::IpsExcursion { r, radius },
        MonitorKind::MeanfieldExcursion { r, radius },
    ];
    for m in &monitors {
        m.validate()?;
    }
    cfg.j_values
        .iter()
        .map(|&j| {
            let (records, n_failed) = replicate_outcomes(cfg.replicates, |rep| {
                let s = run_coupled_trajectory(&cfg.potential, reference, &law, j, &cfg.sde, rep, &monitors, None)?;
                Ok((s.stopping[0].triggered, s.stopping[1].triggered))
            })?;
            let ips: Accumulator = records.iter().map(|(a, _)| f64::from(u8::from(*a))).collect();
            let mf: Accumulator = records.iter().map(|(_, b)| f64::from(u8::from(*b))).collect();
            Ok(ExcursionFrequency {
                j,
                ips: ips.mean(),
                ips_stderr: ips.stderr(),
                meanfield: mf.mean(),
                meanfield_stderr: mf.stderr(),
                n_ok: records.len(),
                n_failed,
            })
        })
        .collect()
}
