//! Fixed-point construction of the mean-field covariance path.
//!
//! Given a candidate path `Γ`, independent particles are evolved with the
//! coefficients frozen to `Γ` and their mean/covariance re-estimated on the
//! grid; the result is the next iterate. A fixed point reproduces its own
//! covariance, which is the mean-field law.
//!
//! By default every iteration reuses the same initial sample and the same
//! Brownian increments, so the map is deterministic and the successive gaps
//! contract instead of stalling at the Monte-Carlo noise level.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::InitialLaw;
use crate::linalg::{min_eigenvalue, psd_sqrt, SymMatrix};
use crate::measures::covariance_of;
use crate::potentials::Potential;
use crate::rng::{fill_normals, Stream};

use super::path::CovariancePath;
use super::step::{advance_particle, StepScratch};

const BLOCK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicardOptions {
    pub n_particles: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
    /// Collapse threshold on the smallest eigenvalue; 0 disables the check.
    pub cov_floor: f64,
    /// Affinely map the initial sample onto the exact moments of `ρ̄₀`.
    pub moment_match: bool,
    /// Draw new increments for each iteration instead of reusing them.
    pub fresh_noise: bool,
}

impl PicardOptions {
    pub fn new(n_particles: usize, max_iter: usize, tol: f64, seed: u64) -> Self {
        Self {
            n_particles,
            max_iter,
            tol,
            seed,
            cov_floor: 0.0,
            moment_match: true,
            fresh_noise: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PicardOutcome {
    pub path: CovariancePath,
    pub iterations: usize,
    /// `sup_t ‖Γ^{k+1}(t) − Γ^k(t)‖_F` for each iteration.
    pub gaps: Vec<f64>,
    pub converged: bool,
    pub n_particles: usize,
    pub tol: f64,
}

impl PicardOutcome {
    pub fn last_gap(&self) -> f64 {
        self.gaps.last().copied().unwrap_or(f64::INFINITY)
    }
}

/// Per-node `(count, mean, Σ (x−m)(x−m)ᵀ)`; merges are associative.
#[derive(Debug, Clone)]
struct Moments {
    count: f64,
    mean: Vec<f64>,
    scatter: Vec<f64>,
}

impl Moments {
    fn from_points(dim: usize, points: &[f64]) -> Self {
        let n = (points.len() / dim) as f64;
        let (mean, cov) = covariance_of(dim, points);
        Self {
            count: n,
            mean,
            scatter: cov.as_slice().iter().map(|v| v * n).collect(),
        }
    }

    fn merge(&mut self, other: &Moments) {
        let n = self.count + other.count;
        let d = self.mean.len();
        let delta: Vec<f64> = other.mean.iter().zip(&self.mean).map(|(b, a)| b - a).collect();
        let w = self.count * other.count / n;
        for a in 0..d {
            for b in 0..d {
                self.scatter[a * d + b] += other.scatter[a * d + b] + w * delta[a] * delta[b];
            }
        }
        for (m, dl) in self.mean.iter_mut().zip(&delta) {
            *m += dl * other.count / n;
        }
        self.count = n;
    }

    fn covariance(&self) -> Result<SymMatrix> {
        let d = self.mean.len();
        let entries: Vec<f64> = self.scatter.iter().map(|v| v / self.count).collect();
        SymMatrix::from_row_major(d, &entries)
    }
}

fn initial_sample(law: &dyn InitialLaw, opts: &PicardOptions) -> Result<Vec<f64>> {
    let d = law.dim();
    let mut points = law.sample_block(opts.seed, Stream::PicardInitial, 0, opts.n_particles);
    if let (true, Some((m0, c0))) = (opts.moment_match, law.moments()) {
        let (m_hat, c_hat) = covariance_of(d, &points);
        let spectrum = c_hat.spectrum()?;
        if spectrum.min() <= 0.0 {
            return Err(Error::invalid("initial sample covariance is singular; cannot moment-match"));
        }
        let inv_root = spectrum.map(|l| 1.0 / l.sqrt());
        let map = psd_sqrt(&c0)?.as_matrix() * inv_root.as_matrix();
        let mut centered = vec![0.0; d];
        for x in points.chunks_mut(d) {
            for k in 0..d {
                centered[k] = x[k] - m_hat[k];
            }
            for k in 0..d {
                x[k] = m0[k] + (0..d).map(|l| map[(k, l)] * centered[l]).sum::<f64>();
            }
        }
    }
    Ok(points)
}

/// One application of the fixed-point map to `gamma`.
fn apply_map(
    pot: &Potential,
    gamma: &CovariancePath,
    initial: &[f64],
    dim: usize,
    seed: u64,
    replicate: u64,
) -> Result<Vec<Moments>> {
    let grid = gamma.grid();
    let blocks: Vec<Vec<Moments>> = initial
        .par_chunks(BLOCK * dim)
        .enumerate()
        .map(|(b, chunk)| {
            let mut points = chunk.to_vec();
            let mut scratch = StepScratch::new(dim);
            let mut stats = Vec::with_capacity(grid.len());
            for (i, w) in grid.windows(2).enumerate() {
                stats.push(Moments::from_points(dim, &points));
                let dt = w[1] - w[0];
                let node = gamma.node(i);
                for (j, x) in points.chunks_mut(dim).enumerate() {
                    let global = (b * BLOCK + j) as u64;
                    fill_normals(seed, Stream::PicardIncrements, replicate, i as u64, global, &mut scratch.noise);
                    if !advance_particle(pot, x, &node.cov, &node.root, dt, &mut scratch) {
                        return Err(Error::NonFinite { step: i });
                    }
                }
            }
            stats.push(Moments::from_points(dim, &points));
            Ok(stats)
        })
        .collect::<Result<_>>()?;

    let mut iter = blocks.into_iter();
    let mut total = iter.next().expect("at least one block");
    for block in iter {
        for (acc, m) in total.iter_mut().zip(&block) {
            acc.merge(m);
        }
    }
    Ok(total)
}

/// Iterates the frozen-coefficient map from the constant path at the initial
/// moments until successive covariance paths differ by less than `tol` in
/// sup-Frobenius norm.
pub fn picard_covariance_path(
    pot: &Potential,
    law: &dyn InitialLaw,
    grid: &[f64],
    opts: &PicardOptions,
) -> Result<PicardOutcome> {
    let d = law.dim();
    if pot.dim() != d {
        return Err(Error::DimMismatch {
            expected: pot.dim(),
            found: d,
        });
    }
    if opts.n_particles < 1000 {
        return Err(Error::invalid("picard.n_particles must be ≥ 1000"));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::invalid("picard.tol must be positive"));
    }
    if opts.max_iter == 0 {
        return Err(Error::invalid("picard.max_iter must be ≥ 1"));
    }

    let initial = initial_sample(law, opts)?;
    let (m0, c0) = law.moments().unwrap_or_else(|| covariance_of(d, &initial));
    let mut gamma = CovariancePath::new(grid.to_vec(), vec![m0; grid.len()], vec![c0; grid.len()])?;

    let mut gaps = Vec::new();
    let mut best: Option<(f64, CovariancePath)> = None;
    for iteration in 1..=opts.max_iter {
        let replicate = if opts.fresh_noise { iteration as u64 } else { 0 };
        let stats = apply_map(pot, &gamma, &initial, d, opts.seed, replicate)?;
        let mut means = Vec::with_capacity(stats.len());
        let mut mats = Vec::with_capacity(stats.len());
        for (t, s) in grid.iter().zip(stats) {
            let cov = s.covariance()?;
            if opts.cov_floor > 0.0 {
                let lo = min_eigenvalue(&cov)?;
                if lo < opts.cov_floor {
                    return Err(Error::CovarianceCollapse {
                        time: *t,
                        min_eigenvalue: lo,
                        floor: opts.cov_floor,
                    });
                }
            }
            means.push(s.mean);
            mats.push(cov);
        }
        let next = CovariancePath::new(grid.to_vec(), means, mats)?;
        let gap = next.sup_cov_distance(&gamma)?;
        gaps.push(gap);
        gamma = next;
        if gap < opts.tol {
            return Ok(PicardOutcome {
                path: gamma,
                iterations: iteration,
                gaps,
                converged: true,
                n_particles: opts.n_particles,
                tol: opts.tol,
            });
        }
        if best.as_ref().is_none_or(|(g, _)| gap < *g) {
            best = Some((gap, gamma.clone()));
        }
    }
    let (_, path) = best.expect("max_iter ≥ 1");
    Err(Error::NoConvergence(Box::new(PicardOutcome {
        path,
        iterations: opts.max_iter,
        gaps,
        converged: false,
        n_particles: opts.n_particles,
        tol: opts.tol,
    })))
}
