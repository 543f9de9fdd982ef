//! Uniform empirical measures: moments and Wasserstein distances.

use serde::{Deserialize, Serialize};

use crate::assignment;
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

/// Largest support size accepted by [`wasserstein_assignment`].
pub const ASSIGNMENT_CAP: usize = 512;

/// `J` points in `R^dim`, each carrying weight `1/J`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureData")]
pub struct EmpiricalMeasure {
    dim: usize,
    points: Vec<f64>,
}

#[derive(Deserialize)]
struct MeasureData {
    dim: usize,
    points: Vec<f64>,
}

impl TryFrom<MeasureData> for EmpiricalMeasure {
    type Error = Error;

    fn try_from(data: MeasureData) -> Result<Self> {
        EmpiricalMeasure::new(data.dim, data.points)
    }
}

impl EmpiricalMeasure {
    /// `points` is row-major `J × dim`.
    pub fn new(dim: usize, points: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        if points.is_empty() || !points.len().is_multiple_of(dim) {
            return Err(Error::invalid(format!(
                "expected a non-empty multiple of {dim} coordinates, got {}",
                points.len()
            )));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("empirical measure coordinates must be finite"));
        }
        Ok(Self { dim, points })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid("rows have unequal length"));
        }
        Self::new(dim, rows.concat())
    }

    /// Wraps positions that the caller already knows to be finite.
    pub(crate) fn from_positions(dim: usize, points: Vec<f64>) -> Self {
        debug_assert!(dim > 0 && !points.is_empty() && points.len().is_multiple_of(dim));
        Self { dim, points }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.points[j * self.dim..(j + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.points
    }

    pub fn translated(&self, shift: &[f64]) -> Self {
        assert_eq!(shift.len(), self.dim);
        let points = self
            .points
            .chunks_exact(self.dim)
            .flat_map(|p| p.iter().zip(shift).map(|(x, a)| x + a))
            .collect();
        Self {
            dim: self.dim,
            points,
        }
    }
}

/// Mean over flat row-major points.
pub(crate) fn mean_of(dim: usize, points: &[f64]) -> Vec<f64> {
    let n = points.len() / dim;
    let mut m = vec![0.0; dim];
    for p in points.chunks_exact(dim) {
        for (mk, x) in m.iter_mut().zip(p) {
            *mk += x;
        }
    }
    m.iter_mut().for_each(|v| *v /= n as f64);
    m
}

/// Population covariance (divisor `J`) over flat row-major points.
pub(crate) fn covariance_of(dim: usize, points: &[f64]) -> (Vec<f64>, SymMatrix) {
    let n = points.len() / dim;
    let m = mean_of(dim, points);
    let mut c = vec![0.0; dim * dim];
    let mut centered = vec![0.0; dim];
    for p in points.chunks_exact(dim) {
        for k in 0..dim {
            centered[k] = p[k] - m[k];
        }
        for a in 0..dim {
            for b in a..dim {
                c[a * dim + b] += centered[a] * centered[b];
            }
        }
    }
    for a in 0..dim {
        for b in a..dim {
            let v = c[a * dim + b] / n as f64;
            c[a * dim + b] = v;
            c[b * dim + a] = v;
        }
    }
    let cov = SymMatrix::from_row_major(dim, &c).expect("covariance of finite points is finite");
    (m, cov)
}

pub fn mean(mu: &EmpiricalMeasure) -> Vec<f64> {
    mean_of(mu.dim, &mu.points)
}

/// `(1/J) Σ (x_j − m)(x_j − m)ᵀ`.
pub fn covariance(mu: &EmpiricalMeasure) -> SymMatrix {
    covariance_of(mu.dim, &mu.points).1
}

#[inline]
pub(crate) fn dist_pow(x: &[f64], y: &[f64], p: f64) -> f64 {
    let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    if p == 2.0 {
        sq
    } else {
        sq.sqrt().powf(p)
    }
}

fn check_p(p: f64) -> Result<()> {
    if p >= 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("Wasserstein order must be ≥ 1, got {p}")))
    }
}

fn check_pair(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<()> {
    if mu.dim != nu.dim {
        return Err(Error::DimMismatch {
            expected: mu.dim,
            found: nu.dim,
        });
    }
    if mu.len() != nu.len() {
        return Err(Error::SizeMismatch {
            left: mu.len(),
            right: nu.len(),
        });
    }
    Ok(())
}

/// Exact `W_p` between equal-size uniform measures: the minimum over
/// permutations σ of `((1/J) Σ |x_j − y_σ(j)|^p)^{1/p}`.
pub fn wasserstein_assignment(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, p: f64) -> Result<f64> {
    wasserstein_assignment_capped(mu, nu, p, ASSIGNMENT_CAP)
}

pub fn wasserstein_assignment_capped(
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
    p: f64,
    cap: usize,
) -> Result<f64> {
    check_p(p)?;
    check_pair(mu, nu)?;
    let n = mu.len();
    if n > cap {
        return Err(Error::CapExceeded { size: n, cap });
    }
    let mut cost = Vec::with_capacity(n * n);
    for x in mu.points() {
        for y in nu.points() {
            cost.push(dist_pow(x, y, p));
        }
    }
    let (_, total) = assignment::solve(n, &cost);
    Ok((total.max(0.0) / n as f64).powf(1.0 / p))
}

/// `W_p` under the identity pairing `x_j ↔ y_j`; an upper bound on the optimum.
pub fn wasserstein_identity_bound(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, p: f64) -> Result<f64> {
    check_p(p)?;
    check_pair(mu, nu)?;
    let total: f64 = mu.points().zip(nu.points()).map(|(x, y)| dist_pow(x, y, p)).sum();
    Ok((total / mu.len() as f64).powf(1.0 / p))
}

/// `W_p(μ, δ₀) = ((1/J) Σ |x_j|^p)^{1/p}`.
pub fn wasserstein_to_dirac(mu: &EmpiricalMeasure, p: f64) -> Result<f64> {
    check_p(p)?;
    Ok(moment(mu.dim, &mu.points, p).powf(1.0 / p))
}

/// `(1/J) Σ |x_j|^p` over flat row-major points.
pub(crate) fn moment(dim: usize, points: &[f64], p: f64) -> f64 {
    let zero = vec![0.0; dim];
    let n = points.len() / dim;
    points.chunks_exact(dim).map(|x| dist_pow(x, &zero, p)).sum::<f64>() / n as f64
}

/// One-dimensional `W_p` by pairing order statistics.
pub fn wasserstein_1d(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, p: f64) -> Result<f64> {
    check_p(p)?;
    if mu.dim != 1 {
        return Err(Error::DimNotOne(mu.dim));
    }
    check_pair(mu, nu)?;
    let mut a = mu.points.clone();
    let mut b = nu.points.clone();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let total: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs().powf(p)).sum();
    Ok((total / a.len() as f64).powf(1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn m1(xs: &[f64]) -> EmpiricalMeasure {
        EmpiricalMeasure::new(1, xs.to_vec()).unwrap()
    }

    #[test]
    fn rejects_bad_input() {
        assert!(EmpiricalMeasure::new(2, vec![]).is_err());
        assert!(EmpiricalMeasure::new(2, vec![1.0, 2.0, 3.0]).is_err());
        assert!(EmpiricalMeasure::new(1, vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn mean_examples() {
        let mu = EmpiricalMeasure::from_rows(&[vec![0.0, 0.0], vec![2.0, 0.0]]).unwrap();
        assert_eq!(mean(&mu), vec![1.0, 0.0]);
        let single = EmpiricalMeasure::from_rows(&[vec![3.0, 4.0]]).unwrap();
        assert_eq!(mean(&single), vec![3.0, 4.0]);
        assert_abs_diff_eq!(mean(&m1(&[1.0, 2.0, 6.0]))[0], 3.0, epsilon = 1e-15);
    }

    #[test]
    fn covariance_examples() {
        let single = EmpiricalMeasure::from_rows(&[vec![3.0, 4.0]]).unwrap();
        assert_eq!(covariance(&single), SymMatrix::zeros(2));
        let mu = EmpiricalMeasure::from_rows(&[vec![0.0, 0.0], vec![2.0, 0.0]]).unwrap();
        assert_eq!(covariance(&mu), SymMatrix::from_diagonal(&[1.0, 0.0]));
        // (4 + 1 + 9) / 3
        assert_abs_diff_eq!(covariance(&m1(&[1.0, 2.0, 6.0])).get(0, 0), 14.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn assignment_examples() {
        let mu = EmpiricalMeasure::from_rows(&[vec![0.0, 1.0], vec![2.0, -1.0], vec![0.5, 0.5]]).unwrap();
        assert_eq!(wasserstein_assignment(&mu, &mu, 2.0).unwrap(), 0.0);
        assert_abs_diff_eq!(wasserstein_assignment(&m1(&[0.0]), &m1(&[3.0]), 2.0).unwrap(), 3.0, epsilon = 1e-14);
        // permutations: (0→0.5, 1→2): 0.25 + 1 = 1.25; (0→2, 1→0.5): 4 + 0.25
        let w = wasserstein_assignment(&m1(&[0.0, 1.0]), &m1(&[0.5, 2.0]), 2.0).unwrap();
        assert_abs_diff_eq!(w, (1.25f64 / 2.0).sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(w, 0.790_569_415_042_094_8, epsilon = 1e-12);
    }

    #[test]
    fn assignment_errors() {
        let a = m1(&[0.0, 1.0]);
        let b = m1(&[0.0]);
        assert!(matches!(wasserstein_assignment(&a, &b, 2.0), Err(Error::SizeMismatch { .. })));
        let c = EmpiricalMeasure::new(2, vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        assert!(matches!(wasserstein_assignment(&a, &c, 2.0), Err(Error::DimMismatch { .. })));
        let big = m1(&[0.0; 4]);
        assert!(matches!(
            wasserstein_assignment_capped(&big, &big, 2.0, 3),
            Err(Error::CapExceeded { .. })
        ));
        assert!(wasserstein_assignment(&a, &a, 0.5).is_err());
    }

    #[test]
    fn dirac_examples() {
        assert_abs_diff_eq!(wasserstein_to_dirac(&m1(&[1.0, -1.0]), 2.0).unwrap(), 1.0, epsilon = 1e-15);
        let single = EmpiricalMeasure::from_rows(&[vec![3.0, 4.0]]).unwrap();
        for p in [1.0, 2.0, 3.5] {
            assert_abs_diff_eq!(wasserstein_to_dirac(&single, p).unwrap(), 5.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(wasserstein_to_dirac(&m1(&[0.0, 2.0]), 4.0).unwrap(), 8f64.powf(0.25), epsilon = 1e-14);
    }

    #[test]
    fn sorted_coupling_examples() {
        let a = m1(&[0.3, -1.0, 2.0]);
        assert_eq!(wasserstein_1d(&a, &a, 2.0).unwrap(), 0.0);
        assert_eq!(wasserstein_1d(&m1(&[0.0, 1.0]), &m1(&[1.0, 0.0]), 2.0).unwrap(), 0.0);
        assert_abs_diff_eq!(
            wasserstein_1d(&m1(&[0.0, 1.0]), &m1(&[0.5, 2.0]), 2.0).unwrap(),
            (1.25f64 / 2.0).sqrt(),
            epsilon = 1e-14
        );
        let c = EmpiricalMeasure::new(2, vec![0.0, 0.0]).unwrap();
        assert!(matches!(wasserstein_1d(&c, &c, 2.0), Err(Error::DimNotOne(2))));
    }
}
