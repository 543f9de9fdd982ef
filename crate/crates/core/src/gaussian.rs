use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, psd_sqrt, SymMatrix};
use crate::rng::{fill_normals, Stream};

/// A Gaussian law `N(mean, cov)`, used for initial ensembles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub mean: Vec<f64>,
    pub cov: SymMatrix,
}

impl GaussianSpec {
    pub fn new(mean: Vec<f64>, cov: SymMatrix) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::DimMismatch {
                expected: cov.dim(),
                found: mean.len(),
            });
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::invalid("Gaussian mean must be finite"));
        }
        Ok(Self { mean, cov })
    }

    pub fn standard(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            cov: SymMatrix::identity(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Fails unless the covariance is strictly positive definite.
    pub fn require_nondegenerate(&self) -> Result<()> {
        let lo = min_eigenvalue(&self.cov)?;
        if lo > 0.0 {
            Ok(())
        } else {
            Err(Error::invalid(format!("Gaussian covariance must be positive definite (min eigenvalue {lo:e})")))
        }
    }

    pub fn sampler(&self) -> Result<GaussianSampler> {
        Ok(GaussianSampler {
            mean: self.mean.clone(),
            cov: self.cov.clone(),
            root: psd_sqrt(&self.cov)?,
        })
    }
}

/// Draws `mean + √cov · z` with `z` from the keyed normal streams.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    mean: Vec<f64>,
    cov: SymMatrix,
    root: SymMatrix,
}

impl GaussianSampler {
    /// Sample number `index` of `(stream, replicate)`, written into `out`.
    pub fn sample_into(&self, seed: u64, stream: Stream, replicate: u64, index: u64, out: &mut [f64]) {
        let mut z = vec![0.0; self.mean.len()];
        fill_normals(seed, stream, replicate, 0, index, &mut z);
        self.root.mul_vec_into(&z, out);
        for (o, m) in out.iter_mut().zip(&self.mean) {
            *o += m;
        }
    }
}

/// A seeded sampler of initial particle positions.
pub trait InitialLaw: Sync {
    fn dim(&self) -> usize;

    /// Writes sample `index` of `(stream, replicate)` into `out`.
    fn sample_into(&self, seed: u64, stream: Stream, replicate: u64, index: u64, out: &mut [f64]);

    /// Exact mean and covariance, when known in closed form.
    fn moments(&self) -> Option<(Vec<f64>, SymMatrix)> {
        None
    }

    /// `n` samples as a flat row-major array.
    fn sample_block(&self, seed: u64, stream: Stream, replicate: u64, n: usize) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; n * d];
        for (j, row) in out.chunks_mut(d).enumerate() {
            self.sample_into(seed, stream, replicate, j as u64, row);
        }
        out
    }
}

impl InitialLaw for GaussianSampler {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn sample_into(&self, seed: u64, stream: Stream, replicate: u64, index: u64, out: &mut [f64]) {
        GaussianSampler::sample_into(self, seed, stream, replicate, index, out)
    }

    fn moments(&self) -> Option<(Vec<f64>, SymMatrix)> {
        Some((self.mean.clone(), self.cov.clone()))
    }
}
