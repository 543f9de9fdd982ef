//! Negative log-densities with closed-form derivatives, and sampled checks of
//! the polynomial growth class they are expected to belong to.
//!
//! Two families ship:
//!
//! * `Quadratic`: `φ(x) = ½ (x−m)ᵀ A (x−m) + offset`, growth exponent 0.
//! * `EvenPower`: `φ(x) = s |x−m|^{ℓ+2} + offset`, growth exponent ℓ.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, SymMatrix};
use crate::rng::{SplitMix64, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Potential {
    Quadratic {
        precision: SymMatrix,
        center: Vec<f64>,
        offset: f64,
    },
    EvenPower {
        ell: u32,
        scale: f64,
        center: Vec<f64>,
        offset: f64,
    },
}

impl Potential {
    pub fn quadratic(precision: SymMatrix, center: Vec<f64>, offset: f64) -> Result<Self> {
        if center.len() != precision.dim() {
            return Err(Error::DimMismatch {
                expected: precision.dim(),
                found: center.len(),
            });
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("potential center must be finite"));
        }
        if !(offset >= 1.0) {
            return Err(Error::invalid("potential offset must be ≥ 1"));
        }
        if !(min_eigenvalue(&precision)? > 0.0) {
            return Err(Error::invalid("precision matrix must be positive definite"));
        }
        Ok(Potential::Quadratic {
            precision,
            center,
            offset,
        })
    }

    /// `½|x|² + 1` in dimension `dim`.
    pub fn standard_quadratic(dim: usize) -> Self {
        Potential::Quadratic {
            precision: SymMatrix::identity(dim),
            center: vec![0.0; dim],
            offset: 1.0,
        }
    }

    pub fn even_power(ell: u32, scale: f64, center: Vec<f64>, offset: f64) -> Result<Self> {
        if ell == 0 || !ell.is_multiple_of(2) {
            return Err(Error::invalid(format!("even-power exponent must be even and positive, got {ell}")));
        }
        if center.is_empty() || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("potential center must be finite and non-empty"));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid("even-power scale must be positive"));
        }
        if !(offset >= 1.0) {
            return Err(Error::invalid("potential offset must be ≥ 1"));
        }
        Ok(Potential::EvenPower {
            ell,
            scale,
            center,
            offset,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Potential::Quadratic { center, .. } | Potential::EvenPower { center, .. } => center.len(),
        }
    }

    /// Growth exponent ℓ of the family.
    pub fn ell(&self) -> u32 {
        match self {
            Potential::Quadratic { .. } => 0,
            Potential::EvenPower { ell, .. } => *ell,
        }
    }

    pub fn center(&self) -> &[f64] {
        match self {
            Potential::Quadratic { center, .. } | Potential::EvenPower { center, .. } => center,
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() == self.dim() {
            Ok(())
        } else {
            Err(Error::DimMismatch {
                expected: self.dim(),
                found: x.len(),
            })
        }
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(match self {
            Potential::Quadratic {
                precision,
                center,
                offset,
            } => {
                let r: Vec<f64> = x.iter().zip(center).map(|(a, b)| a - b).collect();
                let ar = precision.mul_vec(&r);
                0.5 * dot(&r, &ar) + offset
            }
            Potential::EvenPower {
                ell,
                scale,
                center,
                offset,
            } => {
                let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                scale * r2.powi(*ell as i32 / 2 + 1) + offset
            }
        })
    }

    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut g = vec![0.0; self.dim()];
        self.grad_into(x, &mut g);
        Ok(g)
    }

    /// Unchecked gradient for the integrators' inner loops.
    #[inline]
    pub(crate) fn grad_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Potential::Quadratic { precision, center, .. } => {
                let d = center.len();
                let a = precision.as_slice();
                for i in 0..d {
                    let row = &a[i * d..(i + 1) * d];
                    out[i] = row.iter().zip(x.iter().zip(center)).map(|(aij, (xj, cj))| aij * (xj - cj)).sum();
                }
            }
            Potential::EvenPower { ell, scale, center, .. } => {
                let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                let factor = scale * f64::from(ell + 2) * r2.powi(*ell as i32 / 2);
                for ((o, xi), ci) in out.iter_mut().zip(x).zip(center) {
                    *o = factor * (xi - ci);
                }
            }
        }
    }

    pub fn hessian(&self, x: &[f64]) -> Result<SymMatrix> {
        self.check_dim(x)?;
        Ok(match self {
            Potential::Quadratic { precision, .. } => precision.clone(),
            Potential::EvenPower { ell, scale, center, .. } => {
                let d = center.len();
                let r: Vec<f64> = x.iter().zip(center).map(|(a, b)| a - b).collect();
                let r2 = dot(&r, &r);
                let ell = *ell as i32;
                let k = scale * f64::from(ell + 2);
                // k (|r|^ℓ I + ℓ |r|^{ℓ−2} r rᵀ)
                let iso = k * r2.powi(ell / 2);
                let rank1 = k * f64::from(ell) * r2.powi(ell / 2 - 1);
                let mut h = vec![0.0; d * d];
                for i in 0..d {
                    for j in 0..d {
                        h[i * d + j] = rank1 * r[i] * r[j] + if i == j { iso } else { 0.0 };
                    }
                }
                SymMatrix::from_row_major(d, &h)?
            }
        })
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn phi_value(pot: &Potential, x: &[f64]) -> Result<f64> {
    pot.value(x)
}

pub fn phi_grad(pot: &Potential, x: &[f64]) -> Result<Vec<f64>> {
    pot.grad(x)
}

pub fn phi_hess(pot: &Potential, x: &[f64]) -> Result<SymMatrix> {
    pot.hessian(x)
}

/// `⟨y − x, ∇φ(y) − ∇φ(x)⟩`.
pub fn convexity_inner(pot: &Potential, x: &[f64], y: &[f64]) -> Result<f64> {
    let gx = pot.grad(x)?;
    let gy = pot.grad(y)?;
    Ok(x.iter()
        .zip(y)
        .zip(gx.iter().zip(&gy))
        .map(|((xi, yi), (gxi, gyi))| (yi - xi) * (gyi - gxi))
        .sum())
}

/// Acceptable window for the sampled growth ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassBounds {
    pub lower: f64,
    pub upper: f64,
}

impl Default for ClassBounds {
    fn default() -> Self {
        Self {
            lower: 1e-3,
            upper: 1e3,
        }
    }
}

/// Observed range `[min, max]` of one ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioRange {
    pub min: f64,
    pub max: f64,
}

impl RatioRange {
    fn empty() -> Self {
        Self {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }

    fn push(&mut self, v: f64) {
        if v.is_nan() {
            self.min = f64::NAN;
            self.max = f64::NAN;
        } else if !self.min.is_nan() {
            self.min = self.min.min(v);
            self.max = self.max.max(v);
        }
    }

    fn within(&self, bounds: ClassBounds) -> bool {
        self.min.is_finite() && self.max.is_finite() && self.min > 0.0 && self.min >= bounds.lower && self.max <= bounds.upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub ell: u32,
    /// `φ(x) / |x|^{ℓ+2}`
    pub value_ratio: RatioRange,
    /// `|∇φ(x)| / |x|^{ℓ+1}`
    pub grad_ratio: RatioRange,
    /// Hessian eigenvalues over `|x|^ℓ` (min of smallest, max of largest).
    pub hessian_ratio: RatioRange,
    /// Sampled sup of `‖D²φ(z)‖₂ / (1 + |z|^ℓ)` over the ball of the outer radius;
    /// the constant in `|∇φ(x) − ∇φ(y)| ≤ ũ (1 + |x|^ℓ + |y|^ℓ) |x − y|`.
    pub lipschitz_constant: f64,
    pub bounds: ClassBounds,
    pub pass: bool,
}

pub fn check_class(pot: &Potential, ell: u32, n_samples: usize, radius_range: (f64, f64), seed: u64) -> Result<ClassReport> {
    check_class_with_bounds(pot, ell, n_samples, radius_range, seed, ClassBounds::default())
}

/// Samples points on shells `|x| ∈ radius_range` (the ball of radius
/// `radius_range.0` plays the excluded compact set) and records the growth
/// ratios. Each sampled direction is also probed at both shell radii.
pub fn check_class_with_bounds(
    pot: &Potential,
    ell: u32,
    n_samples: usize,
    radius_range: (f64, f64),
    seed: u64,
    bounds: ClassBounds,
) -> Result<ClassReport> {
    let (r_lo, r_hi) = radius_range;
    if n_samples == 0 {
        return Err(Error::invalid("n_samples must be ≥ 1"));
    }
    if !(r_lo > 0.0 && r_hi >= r_lo && r_hi.is_finite()) {
        return Err(Error::invalid("radius_range must satisfy 0 < lo ≤ hi < ∞"));
    }
    let d = pot.dim();
    let e = ell as i32;
    let mut rng = SplitMix64::keyed(seed, Stream::ClassCheck, 0, 0, 0);
    let mut value_ratio = RatioRange::empty();
    let mut grad_ratio = RatioRange::empty();
    let mut hessian_ratio = RatioRange::empty();
    let mut lipschitz = 0.0f64;
    let mut dir = vec![0.0; d];

    let mut record_shell = |x: &[f64], r: f64| -> Result<()> {
        value_ratio.push(pot.value(x)? / r.powi(e + 2));
        grad_ratio.push(norm(&pot.grad(x)?) / r.powi(e + 1));
        let spec = pot.hessian(x)?.spectrum()?;
        hessian_ratio.push(spec.min() / r.powi(e));
        hessian_ratio.push(spec.max() / r.powi(e));
        Ok(())
    };

    for _ in 0..n_samples {
        let n = loop {
            dir.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
            let n = norm(&dir);
            if n > 1e-12 {
                break n;
            }
        };
        dir.iter_mut().for_each(|v| *v /= n);
        let u: f64 = rng.random();
        let radii = [r_lo, r_lo + u * (r_hi - r_lo), r_hi];
        for r in radii {
            let x: Vec<f64> = dir.iter().map(|v| v * r).collect();
            record_shell(&x, r)?;
        }
        // interior probes for the local Lipschitz constant
        let w: f64 = rng.random();
        for r in [0.0, w * r_hi, r_lo, radii[1], r_hi] {
            let z: Vec<f64> = dir.iter().map(|v| v * r).collect();
            let spec = pot.hessian(&z)?.spectrum()?;
            let op = spec.max().abs().max(spec.min().abs());
            lipschitz = lipschitz.max(op / (1.0 + r.powi(e)));
        }
    }

    let pass = value_ratio.within(bounds) && grad_ratio.within(bounds) && hessian_ratio.within(bounds);
    Ok(ClassReport {
        ell,
        value_ratio,
        grad_ratio,
        hessian_ratio,
        lipschitz_constant: lipschitz,
        bounds,
        pass,
    })
}

/// Constants fitted to `⟨y−x, ∇φ(y)−∇φ(x)⟩ ≥ c₁(1+|x|^ℓ+|y|^ℓ)|y−x|² − c₂|y−x|²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvexityFit {
    pub c1: f64,
    pub c2: f64,
    /// `min ⟨y−x, ∇φ(y)−∇φ(x)⟩ / |y−x|²`: the plain monotonicity modulus.
    pub monotonicity_modulus: f64,
    pub n_pairs: usize,
}

/// Fits the convexity constants over the given pairs.
///
/// When every pair has positive weighted ratio, `c₁` is its minimum and
/// `c₂ = 0`. Otherwise `c₁` is the median ratio and `c₂` the smallest value
/// covering every pair.
pub fn fit_convexity(pot: &Potential, pairs: &[(Vec<f64>, Vec<f64>)]) -> Result<ConvexityFit> {
    let ell = pot.ell() as i32;
    let mut ratios = Vec::with_capacity(pairs.len());
    let mut modulus = f64::INFINITY;
    let mut rows = Vec::with_capacity(pairs.len());
    for (x, y) in pairs {
        let gap2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        if gap2 == 0.0 {
            continue;
        }
        let inner = convexity_inner(pot, x, y)?;
        let weight = 1.0 + norm(x).powi(ell) + norm(y).powi(ell);
        ratios.push(inner / (weight * gap2));
        modulus = modulus.min(inner / gap2);
        rows.push((inner, weight, gap2));
    }
    if ratios.is_empty() {
        return Err(Error::invalid("convexity fit needs at least one pair with x ≠ y"));
    }
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let (c1, c2) = if min_ratio > 0.0 {
        (min_ratio, 0.0)
    } else {
        let mut sorted = ratios.clone();
        sorted.sort_by(f64::total_cmp);
        let c1 = sorted[sorted.len() / 2].max(0.0);
        let c2 = rows
            .iter()
            .map(|(inner, w, g2)| (c1 * w * g2 - inner) / g2)
            .fold(0.0f64, f64::max);
        (c1, c2)
    };
    Ok(ConvexityFit {
        c1,
        c2,
        monotonicity_modulus: modulus,
        n_pairs: rows.len(),
    })
}
