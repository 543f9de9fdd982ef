//! Dense symmetric matrices and the PSD primitives built on a symmetric
//! eigendecomposition: square roots, extreme eigenvalues, inverses.
//!
//! All matrices here are small (the particle dimension), so everything is
//! stored densely and decomposed exactly rather than iterated.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const EIGEN_MAX_ITER: usize = 10_000;

/// Relative clamp below which negative eigenvalues are treated as rounding noise.
pub const PSD_CLAMP_REL: f64 = 1e-10;

/// Default floor for [`invert_spd`].
pub const DEFAULT_INVERSION_FLOOR: f64 = 1e-8;

/// A dense symmetric `dim × dim` matrix with finite entries.
///
/// Construction symmetrizes as `(M + Mᵀ)/2`, so `get(i, j) == get(j, i)` holds
/// bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SymMatrix {
    inner: DMatrix<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            inner: DMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            inner: DMatrix::identity(dim, dim),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            inner: DMatrix::from_fn(n, n, |i, j| if i == j { diag[i] } else { 0.0 }),
        }
    }

    /// Builds from row-major entries, symmetrizing and rejecting non-finite input.
    pub fn from_row_major(dim: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("matrix entries must be finite"));
        }
        Ok(Self::symmetrized(DMatrix::from_row_slice(dim, dim, entries)))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut flat = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            flat.extend_from_slice(row);
        }
        Self::from_row_major(dim, &flat)
    }

    /// Symmetrizes an arbitrary square matrix. Entries are assumed finite.
    pub fn symmetrized(m: DMatrix<f64>) -> Self {
        assert!(m.is_square(), "symmetric matrix must be square");
        let n = m.nrows();
        let inner = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                m[(i, i)]
            } else {
                0.5 * (m[(i, j)] + m[(j, i)])
            }
        });
        Self { inner }
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner[(i, j)]
    }

    /// Entries in row-major order (identical to column-major by symmetry).
    pub fn as_slice(&self) -> &[f64] {
        self.inner.as_slice()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            inner: &self.inner * c,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            inner: &self.inner + &other.inner,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            inner: &self.inner - &other.inner,
        }
    }

    pub fn trace(&self) -> f64 {
        self.inner.trace()
    }

    /// `out = self · v`.
    #[inline]
    pub fn mul_vec_into(&self, v: &[f64], out: &mut [f64]) {
        let n = self.dim();
        let a = self.inner.as_slice();
        for (i, o) in out.iter_mut().enumerate().take(n) {
            // column i == row i
            let row = &a[i * n..(i + 1) * n];
            *o = row.iter().zip(v).map(|(x, y)| x * y).sum();
        }
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.mul_vec_into(v, &mut out);
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius_norm(self)
    }

    pub fn is_finite(&self) -> bool {
        self.inner.iter().all(|v| v.is_finite())
    }

    /// Eigenvalues (ascending) with matching orthonormal eigenvectors.
    pub fn spectrum(&self) -> Result<Spectrum> {
        if self.dim() == 0 {
            return Ok(Spectrum {
                values: Vec::new(),
                vectors: DMatrix::zeros(0, 0),
            });
        }
        let eig = SymmetricEigen::try_new(self.inner.clone(), f64::EPSILON, EIGEN_MAX_ITER)
            .ok_or(Error::NonConvergedEigen)?;
        let mut order: Vec<usize> = (0..self.dim()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = DMatrix::from_fn(self.dim(), self.dim(), |i, c| eig.eigenvectors[(i, order[c])]);
        Ok(Spectrum { values, vectors })
    }
}

impl TryFrom<Vec<Vec<f64>>> for SymMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl From<SymMatrix> for Vec<Vec<f64>> {
    fn from(m: SymMatrix) -> Self {
        m.to_rows()
    }
}

/// Eigen-decomposition `A = V diag(λ) Vᵀ`, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl Spectrum {
    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// Rebuilds `V diag(f(λ)) Vᵀ`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let n = self.values.len();
        let mut out = DMatrix::zeros(n, n);
        for (k, &lambda) in self.values.iter().enumerate() {
            let w = f(lambda);
            if w == 0.0 {
                continue;
            }
            let v = self.vectors.column(k);
            for j in 0..n {
                let vj = w * v[j];
                for i in 0..n {
                    out[(i, j)] += v[i] * vj;
                }
            }
        }
        SymMatrix::symmetrized(out)
    }
}

pub fn frobenius_norm(a: &SymMatrix) -> f64 {
    a.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn min_eigenvalue(a: &SymMatrix) -> Result<f64> {
    Ok(a.spectrum()?.min())
}

pub fn max_eigenvalue(a: &SymMatrix) -> Result<f64> {
    Ok(a.spectrum()?.max())
}

/// Square root and minimum eigenvalue from a single decomposition.
///
/// Eigenvalues in `[-1e-10·‖a‖_F, 0)` are clamped to zero; anything lower is
/// rejected with [`Error::NotPsd`]. Eigenvalues within rounding noise of zero
/// (`≤ 64 ε · λ_max`) are also zeroed, so rank-deficient inputs get exactly
/// rank-deficient roots and `√(c·a) = √c · √a` holds to rounding.
pub fn psd_sqrt_with_min(a: &SymMatrix) -> Result<(SymMatrix, f64)> {
    let spectrum = a.spectrum()?;
    let clamp = PSD_CLAMP_REL * frobenius_norm(a);
    let lo = spectrum.min();
    if lo < -clamp {
        return Err(Error::NotPsd {
            min_eigenvalue: lo,
            clamp,
        });
    }
    let noise = 64.0 * f64::EPSILON * spectrum.max().abs();
    Ok((spectrum.map(|l| if l <= noise { 0.0 } else { l.sqrt() }), lo))
}

/// Symmetric PSD square root `S` with `S·S = a`.
pub fn psd_sqrt(a: &SymMatrix) -> Result<SymMatrix> {
    psd_sqrt_with_min(a).map(|(s, _)| s)
}

/// Inverse of a symmetric positive definite matrix whose smallest eigenvalue
/// is at least `floor`.
pub fn invert_spd(a: &SymMatrix, floor: f64) -> Result<SymMatrix> {
    if !(floor > 0.0) {
        return Err(Error::invalid("inversion floor must be positive"));
    }
    let spectrum = a.spectrum()?;
    let lo = spectrum.min();
    if lo < floor {
        return Err(Error::BelowFloor {
            min_eigenvalue: lo,
            floor,
        });
    }
    Ok(spectrum.map(|l| 1.0 / l))
}
