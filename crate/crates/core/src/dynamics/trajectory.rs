use std::borrow::Cow;

use crate::error::{Error, Result};
use crate::gaussian::InitialLaw;
use crate::measures::{covariance_of, EmpiricalMeasure};
use crate::potentials::Potential;
use crate::rng::Stream;

use super::monitor::{MonitorKind, StoppingMonitor, StoppingRecord};
use super::path::{CovariancePath, PathCoefficients};
use super::step::{advance_particle, diffusion_with_min, StepScratch};
use super::SdeConfig;

/// Receives every recorded snapshot of a coupled run (step 0 included).
pub trait TrajectoryObserver {
    fn observe(&mut self, step: usize, time: f64, ips: &[f64], meanfield: &[f64]);
}

#[derive(Debug, Clone)]
pub struct TrajectorySummary {
    /// `sup_t |X^j_t − X̄^j_t|` per particle, over the step times.
    pub sup_displacement: Vec<f64>,
    /// `sup_t |X̄^j_t|` per particle.
    pub meanfield_sup_norm: Vec<f64>,
    pub final_ips: EmpiricalMeasure,
    pub final_meanfield: EmpiricalMeasure,
    pub stopping: Vec<StoppingRecord>,
    /// `min_t λ_min(C(μ^J_t))` over the pre-step states.
    pub min_cov_eigenvalue: f64,
    /// Whether that minimum fell below `cfg.cov_floor`.
    pub cov_floor_hit: bool,
}

fn coefficients_at<'p>(path: &'p CovariancePath, aligned: bool, step: usize, time: f64) -> Result<Cow<'p, PathCoefficients>> {
    if aligned {
        Ok(Cow::Borrowed(path.node(step)))
    } else {
        path.coefficients_at(time)
    }
}

/// Evolves the IPS and its synchronously coupled mean-field ensemble over
/// `[0, cfg.t_final]` for replicate `replicate`.
#[allow(clippy::too_many_arguments)]
pub fn run_coupled_trajectory(
    pot: &Potential,
    path: &CovariancePath,
    law: &dyn InitialLaw,
    j_particles: usize,
    cfg: &SdeConfig,
    replicate: u64,
    monitors: &[MonitorKind],
    mut observer: Option<&mut dyn TrajectoryObserver>,
) -> Result<TrajectorySummary> {
    cfg.validate()?;
    let d = pot.dim();
    if law.dim() != d || path.dim() != d {
        return Err(Error::DimMismatch {
            expected: d,
            found: if law.dim() != d { law.dim() } else { path.dim() },
        });
    }
    if j_particles == 0 {
        return Err(Error::invalid("need at least one particle"));
    }
    let n_steps = cfg.n_steps();
    if path.end_time() + 1e-9 < cfg.t_final {
        return Err(Error::PathOutOfRange {
            time: cfg.t_final,
            end: path.end_time(),
        });
    }
    let aligned = path.aligned_with(cfg.dt, n_steps);
    let mut monitors: Vec<StoppingMonitor> = monitors.iter().map(|&k| StoppingMonitor::new(k)).collect::<Result<_>>()?;

    let mut ips = law.sample_block(cfg.seed, Stream::InitialPositions, replicate, j_particles);
    let mut mf = ips.clone();
    let noise = cfg.noise(replicate);

    let mut sup_disp = vec![0.0f64; j_particles];
    let mut mf_sup = mf.chunks(d).map(norm).collect::<Vec<_>>();
    let mut min_eig = f64::INFINITY;
    let mut scratch = StepScratch::new(d);

    for step in 0..n_steps {
        let time = cfg.time_at(step);
        for m in monitors.iter_mut() {
            m.observe(time, d, &ips, &mf);
        }
        if let Some(obs) = observer.as_deref_mut() {
            obs.observe(step, time, &ips, &mf);
        }

        let (_, cov) = covariance_of(d, &ips);
        let (root, lo) = diffusion_with_min(&cov)?;
        min_eig = min_eig.min(lo);
        let frozen = coefficients_at(path, aligned, step, time)?;

        for (j, (x, y)) in ips.chunks_mut(d).zip(mf.chunks_mut(d)).enumerate() {
            noise.particle(step as u64, j as u64, &mut scratch.noise);
            let ok_x = advance_particle(pot, x, &cov, &root, cfg.dt, &mut scratch);
            let ok_y = advance_particle(pot, y, &frozen.cov, &frozen.root, cfg.dt, &mut scratch);
            if !(ok_x && ok_y) {
                return Err(Error::NonFinite { step });
            }
            let gap: f64 = x.iter().zip(y.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            sup_disp[j] = sup_disp[j].max(gap);
            mf_sup[j] = mf_sup[j].max(norm(y));
        }
    }

    let t_end = cfg.time_at(n_steps);
    for m in monitors.iter_mut() {
        m.observe(t_end, d, &ips, &mf);
    }
    if let Some(obs) = observer {
        obs.observe(n_steps, t_end, &ips, &mf);
    }
    let (_, cov) = covariance_of(d, &ips);
    min_eig = min_eig.min(cov.spectrum()?.min());

    Ok(TrajectorySummary {
        sup_displacement: sup_disp,
        meanfield_sup_norm: mf_sup,
        final_ips: EmpiricalMeasure::from_positions(d, ips),
        final_meanfield: EmpiricalMeasure::from_positions(d, mf),
        stopping: monitors.iter().map(StoppingMonitor::record).collect(),
        min_cov_eigenvalue: min_eig,
        cov_floor_hit: min_eig < cfg.cov_floor,
    })
}

/// Evolves only the IPS for `n_steps` steps; same initial draw and noise keys
/// as [`run_coupled_trajectory`].
pub fn run_ips(
    pot: &Potential,
    law: &dyn InitialLaw,
    j_particles: usize,
    cfg: &SdeConfig,
    replicate: u64,
    n_steps: usize,
) -> Result<EmpiricalMeasure> {
    let d = pot.dim();
    if law.dim() != d {
        return Err(Error::DimMismatch {
            expected: d,
            found: law.dim(),
        });
    }
    let mut ips = law.sample_block(cfg.seed, Stream::InitialPositions, replicate, j_particles);
    let noise = cfg.noise(replicate);
    let mut scratch = StepScratch::new(d);
    for step in 0..n_steps {
        let (_, cov) = covariance_of(d, &ips);
        let (root, _) = diffusion_with_min(&cov)?;
        for (j, x) in ips.chunks_mut(d).enumerate() {
            noise.particle(step as u64, j as u64, &mut scratch.noise);
            if !advance_particle(pot, x, &cov, &root, cfg.dt, &mut scratch) {
                return Err(Error::NonFinite { step });
            }
        }
    }
    Ok(EmpiricalMeasure::from_positions(d, ips))
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}
