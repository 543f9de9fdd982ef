use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{frobenius_norm, min_eigenvalue, SymMatrix, PSD_CLAMP_REL};

use super::step::diffusion_with_min;

/// Tolerance for matching a query time to a grid node.
const NODE_SNAP: f64 = 1e-9;

/// Longest RK4 step used when a grid interval is coarse.
const MAX_ODE_STEP: f64 = 1e-2;

/// Drift/diffusion coefficients of the mean-field dynamics at one time.
#[derive(Debug, Clone)]
pub struct PathCoefficients {
    pub mean: Vec<f64>,
    pub cov: SymMatrix,
    /// `√(2 cov)`
    pub root: SymMatrix,
}

/// Mean and covariance of the mean-field law on a time grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "PathData", into = "PathData")]
pub struct CovariancePath {
    grid: Vec<f64>,
    nodes: Vec<PathCoefficients>,
}

#[derive(Serialize, Deserialize)]
struct PathData {
    grid: Vec<f64>,
    means: Vec<Vec<f64>>,
    mats: Vec<SymMatrix>,
}

impl TryFrom<PathData> for CovariancePath {
    type Error = Error;

    fn try_from(data: PathData) -> Result<Self> {
        CovariancePath::new(data.grid, data.means, data.mats)
    }
}

impl From<CovariancePath> for PathData {
    fn from(path: CovariancePath) -> Self {
        PathData {
            means: path.nodes.iter().map(|n| n.mean.clone()).collect(),
            mats: path.nodes.iter().map(|n| n.cov.clone()).collect(),
            grid: path.grid,
        }
    }
}

/// `0, dt, 2dt, …, n·dt`.
pub fn uniform_grid(dt: f64, n_steps: usize) -> Vec<f64> {
    (0..=n_steps).map(|k| k as f64 * dt).collect()
}

impl CovariancePath {
    /// Validates a grid starting at 0, strictly increasing, with one PSD
    /// matrix and one mean per node.
    pub fn new(grid: Vec<f64>, means: Vec<Vec<f64>>, mats: Vec<SymMatrix>) -> Result<Self> {
        if grid.is_empty() || grid[0] != 0.0 {
            return Err(Error::invalid("covariance path grid must start at 0"));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("covariance path grid must be strictly increasing"));
        }
        if means.len() != grid.len() || mats.len() != grid.len() {
            return Err(Error::invalid("covariance path needs one mean and one matrix per node"));
        }
        let dim = mats[0].dim();
        let mut nodes = Vec::with_capacity(grid.len());
        for (mean, cov) in means.into_iter().zip(mats) {
            if cov.dim() != dim || mean.len() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    found: cov.dim().max(mean.len()),
                });
            }
            let (root, _) = diffusion_with_min(&cov)?;
            nodes.push(PathCoefficients { mean, cov, root });
        }
        Ok(Self { grid, nodes })
    }

    pub fn dim(&self) -> usize {
        self.nodes[0].cov.dim()
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn end_time(&self) -> f64 {
        *self.grid.last().expect("non-empty grid")
    }

    pub fn node(&self, k: usize) -> &PathCoefficients {
        &self.nodes[k]
    }

    pub fn mats(&self) -> impl Iterator<Item = &SymMatrix> {
        self.nodes.iter().map(|n| &n.cov)
    }

    pub fn means(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.nodes.iter().map(|n| &n.mean)
    }

    /// Whether node `k` sits at time `k·dt` for every `k ≤ n_steps`.
    pub fn aligned_with(&self, dt: f64, n_steps: usize) -> bool {
        self.grid.len() > n_steps
            && (0..=n_steps).all(|k| (self.grid[k] - k as f64 * dt).abs() <= NODE_SNAP * (1.0 + self.grid[k]))
    }

    /// Coefficients at `t`: exact at nodes, otherwise linear interpolation of
    /// mean and covariance entries followed by a PSD square root.
    pub fn coefficients_at(&self, t: f64) -> Result<Cow<'_, PathCoefficients>> {
        let end = self.end_time();
        let snap = NODE_SNAP * (1.0 + t.abs());
        if !(t >= -snap && t <= end + snap) {
            return Err(Error::PathOutOfRange { time: t, end });
        }
        let k = self.grid.partition_point(|&g| g <= t + snap);
        let lo = k.saturating_sub(1);
        if (self.grid[lo] - t).abs() <= snap || lo + 1 >= self.grid.len() {
            return Ok(Cow::Borrowed(&self.nodes[lo]));
        }
        let (t0, t1) = (self.grid[lo], self.grid[lo + 1]);
        let w = (t - t0) / (t1 - t0);
        let (a, b) = (&self.nodes[lo], &self.nodes[lo + 1]);
        let mean = a.mean.iter().zip(&b.mean).map(|(x, y)| (1.0 - w) * x + w * y).collect();
        let cov = a.cov.scale(1.0 - w).add(&b.cov.scale(w));
        let (root, _) = diffusion_with_min(&cov)?;
        Ok(Cow::Owned(PathCoefficients { mean, cov, root }))
    }

    /// Largest node-wise Frobenius distance between covariances on a shared grid.
    pub fn sup_cov_distance(&self, other: &CovariancePath) -> Result<f64> {
        if self.grid.len() != other.grid.len() {
            return Err(Error::SizeMismatch {
                left: self.grid.len(),
                right: other.grid.len(),
            });
        }
        Ok(self
            .nodes
            .iter()
            .zip(&other.nodes)
            .map(|(a, b)| frobenius_norm(&a.cov.sub(&b.cov)))
            .fold(0.0, f64::max))
    }

    /// Smallest eigenvalue over all nodes.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let mut lo = f64::INFINITY;
        for n in &self.nodes {
            lo = lo.min(min_eigenvalue(&n.cov)?);
        }
        Ok(lo)
    }
}

type OdeState = (Vec<f64>, SymMatrix);

/// `ṁ = −C A (m − m*)`, `Ċ = 2C − 2 C A C`.
fn gaussian_rhs(precision: &SymMatrix, target: &[f64], (m, c): &OdeState) -> OdeState {
    let r: Vec<f64> = m.iter().zip(target).map(|(a, b)| a - b).collect();
    let ar = precision.mul_vec(&r);
    let dm = c.mul_vec(&ar).into_iter().map(|v| -v).collect();
    let cac = c.as_matrix() * precision.as_matrix() * c.as_matrix();
    let dc = SymMatrix::symmetrized(c.as_matrix() * 2.0 - cac * 2.0);
    (dm, dc)
}

fn axpy(base: &OdeState, h: f64, k: &OdeState) -> OdeState {
    (
        base.0.iter().zip(&k.0).map(|(a, b)| a + h * b).collect(),
        base.1.add(&k.1.scale(h)),
    )
}

fn rk4_step(precision: &SymMatrix, target: &[f64], y: &OdeState, h: f64) -> OdeState {
    let k1 = gaussian_rhs(precision, target, y);
    let k2 = gaussian_rhs(precision, target, &axpy(y, 0.5 * h, &k1));
    let k3 = gaussian_rhs(precision, target, &axpy(y, 0.5 * h, &k2));
    let k4 = gaussian_rhs(precision, target, &axpy(y, h, &k3));
    let m = (0..y.0.len())
        .map(|i| y.0[i] + h / 6.0 * (k1.0[i] + 2.0 * k2.0[i] + 2.0 * k3.0[i] + k4.0[i]))
        .collect();
    let incr = k1.1.add(&k2.1.scale(2.0)).add(&k3.1.scale(2.0)).add(&k4.1);
    (m, y.1.add(&incr.scale(h / 6.0)))
}

/// Mean-field mean and covariance for a quadratic potential
/// `φ(x) = ½ (x − m*)ᵀ A (x − m*)` started from a Gaussian `N(m0, c0)`,
/// integrated with classical RK4 on the closed moment system.
pub fn gaussian_meanfield_path(
    precision: &SymMatrix,
    target_mean: &[f64],
    m0: &[f64],
    c0: &SymMatrix,
    grid: &[f64],
) -> Result<CovariancePath> {
    let d = precision.dim();
    for len in [target_mean.len(), m0.len(), c0.dim()] {
        if len != d {
            return Err(Error::DimMismatch { expected: d, found: len });
        }
    }
    if grid.first() != Some(&0.0) {
        return Err(Error::invalid("grid must start at 0"));
    }
    if !(min_eigenvalue(c0)? > 0.0) {
        return Err(Error::invalid("initial covariance must be positive definite"));
    }

    let mut y: OdeState = (m0.to_vec(), c0.clone());
    let mut means = vec![y.0.clone()];
    let mut mats = vec![y.1.clone()];
    for w in grid.windows(2) {
        let span = w[1] - w[0];
        let n_sub = (span / MAX_ODE_STEP).ceil().max(1.0) as usize;
        let h = span / n_sub as f64;
        for _ in 0..n_sub {
            y = rk4_step(precision, target_mean, &y, h);
        }
        let lo = min_eigenvalue(&y.1)?;
        if lo < -PSD_CLAMP_REL * frobenius_norm(&y.1) || !y.1.is_finite() {
            return Err(Error::OdeStepRejected {
                time: w[1],
                min_eigenvalue: lo,
            });
        }
        means.push(y.0.clone());
        mats.push(y.1.clone());
    }
    CovariancePath::new(grid.to_vec(), means, mats)
}
