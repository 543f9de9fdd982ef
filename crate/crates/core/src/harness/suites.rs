//! Randomized property suites with replayable counterexamples.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{psd_sqrt, SymMatrix};
use crate::measures::{
    covariance, wasserstein_assignment, wasserstein_identity_bound, wasserstein_to_dirac, EmpiricalMeasure, ASSIGNMENT_CAP,
};
use crate::potentials::{check_class, convexity_inner, fit_convexity, norm, ClassReport, ConvexityFit, Potential};
use crate::rng::{SplitMix64, Stream};

/// Slack below which a check counts as violated.
pub const SUITE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteKind {
    Stability,
    Psd,
    Convexity,
    ClassCheck,
}

impl std::str::FromStr for SuiteKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stability" => Ok(SuiteKind::Stability),
            "psd" => Ok(SuiteKind::Psd),
            "convexity" => Ok(SuiteKind::Convexity),
            "class_check" | "class-check" => Ok(SuiteKind::ClassCheck),
            other => Err(Error::invalid(format!("unknown suite {other:?}"))),
        }
    }
}

/// The inputs that produced a violation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Instance {
    Matrices { a: Vec<Vec<f64>>, b: Vec<Vec<f64>> },
    Measures { mu: EmpiricalMeasure, nu: EmpiricalMeasure },
    Points { x: Vec<f64>, y: Vec<f64> },
    Potential { potential: Potential },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub check: String,
    pub trial: usize,
    pub slack: f64,
    pub instance: Instance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: SuiteKind,
    pub n_checks: usize,
    pub n_violations: usize,
    /// Smallest `rhs − lhs` seen over all checks.
    pub worst_slack: f64,
    /// The worst violation, if any.
    pub violation: Option<Violation>,
    pub convexity: Option<ConvexityFit>,
    pub class_report: Option<ClassReport>,
}

impl SuiteReport {
    fn new(suite: SuiteKind) -> Self {
        Self {
            suite,
            n_checks: 0,
            n_violations: 0,
            worst_slack: f64::INFINITY,
            violation: None,
            convexity: None,
            class_report: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.n_violations == 0
    }

    fn record(&mut self, check: &str, trial: usize, slack: f64, instance: impl FnOnce() -> Instance) {
        self.n_checks += 1;
        let slack = if slack.is_nan() { f64::NEG_INFINITY } else { slack };
        if slack < -SUITE_TOLERANCE {
            self.n_violations += 1;
            if self.violation.as_ref().is_none_or(|v| slack < v.slack) {
                self.violation = Some(Violation {
                    check: check.to_string(),
                    trial,
                    slack,
                    instance: instance(),
                });
            }
        }
        self.worst_slack = self.worst_slack.min(slack);
    }
}

fn normals(rng: &mut SplitMix64, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn random_measure(rng: &mut SplitMix64, dim: usize, j: usize) -> EmpiricalMeasure {
    let scale = 10f64.powf(rng.random_range(-1.0..1.0));
    let shift = normals(rng, dim);
    let pts = (0..j * dim)
        .map(|k| shift[k % dim] + scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    EmpiricalMeasure::new(dim, pts).expect("finite points")
}

fn perturbed(rng: &mut SplitMix64, mu: &EmpiricalMeasure, size: f64) -> EmpiricalMeasure {
    let pts = mu.as_flat().iter().map(|v| v + size * rng.sample::<f64, _>(StandardNormal)).collect();
    EmpiricalMeasure::new(mu.dim(), pts).expect("finite points")
}

/// Wasserstein stability of the covariance and its square root on random
/// equal-size pairs, using the exact assignment `W₂`.
pub fn stability_property_suite(n_trials: usize, dim_max: usize, j_max: usize, seed: u64) -> Result<SuiteReport> {
    if j_max > ASSIGNMENT_CAP {
        return Err(Error::CapExceeded {
            size: j_max,
            cap: ASSIGNMENT_CAP,
        });
    }
    if dim_max == 0 || j_max == 0 {
        return Err(Error::invalid("dim_max and j_max must be ≥ 1"));
    }
    let mut report = SuiteReport::new(SuiteKind::Stability);
    for trial in 0..n_trials {
        let mut rng = SplitMix64::keyed(seed, Stream::Suite, 0, trial as u64, 0);
        let d = rng.random_range(1..=dim_max);
        let j = rng.random_range(1..=j_max);
        let mu = random_measure(&mut rng, d, j);
        // a mix of independent, nearby, translated, and identical pairs
        let nu = match trial % 4 {
            0 | 1 => random_measure(&mut rng, d, j),
            2 => {
                let size = 10f64.powf(rng.random_range(-4.0..0.0));
                perturbed(&mut rng, &mu, size)
            }
            _ if trial % 8 == 3 => mu.clone(),
            _ => mu.translated(&normals(&mut rng, d)),
        };
        let w2 = wasserstein_assignment(&mu, &nu, 2.0)?;
        let (cm, cn) = (covariance(&mu), covariance(&nu));
        let inst = || Instance::Measures {
            mu: mu.clone(),
            nu: nu.clone(),
        };

        let lhs = cm.sub(&cn).frobenius_norm();
        let rhs = 2.0 * (wasserstein_to_dirac(&mu, 2.0)? + wasserstein_to_dirac(&nu, 2.0)?) * w2;
        report.record("covariance_stability", trial, rhs - lhs, inst);

        let lhs = psd_sqrt(&cm)?.sub(&psd_sqrt(&cn)?).frobenius_norm();
        report.record("sqrt_covariance_lipschitz", trial, std::f64::consts::SQRT_2 * w2 - lhs, inst);

        let lhs = cm.frobenius_norm();
        report.record("covariance_below_second_moment", trial, wasserstein_to_dirac(&mu, 2.0)?.powi(2) - lhs, inst);

        report.record("identity_coupling_bound", trial, wasserstein_identity_bound(&mu, &nu, 2.0)? - w2, inst);
    }
    Ok(report)
}

fn random_matrix(rng: &mut SplitMix64, rows: usize, cols: usize) -> nalgebra::DMatrix<f64> {
    let scale = 10f64.powf(rng.random_range(-1.0..1.0));
    nalgebra::DMatrix::from_fn(rows, cols, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

fn gram(m: &nalgebra::DMatrix<f64>) -> SymMatrix {
    SymMatrix::symmetrized(m.transpose() * m)
}

fn rows_of(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Square-root reconstruction, Araki–Yamagami, van Hemmen–Ando, and scaling
/// checks on random matrices of dimension `≤ dim_max`.
pub fn psd_property_suite(n_trials: usize, dim_max: usize, seed: u64) -> Result<SuiteReport> {
    if dim_max == 0 {
        return Err(Error::invalid("dim_max must be ≥ 1"));
    }
    let mut report = SuiteReport::new(SuiteKind::Psd);
    for trial in 0..n_trials {
        let mut rng = SplitMix64::keyed(seed, Stream::Suite, 1, trial as u64, 0);
        let d = rng.random_range(1..=dim_max);
        let k = rng.random_range(1..=d + 2);

        // reconstruction, possibly rank-deficient
        let m = random_matrix(&mut rng, k, d);
        let a = gram(&m);
        let s = psd_sqrt(&a)?;
        let err = SymMatrix::symmetrized(s.as_matrix() * s.as_matrix()).sub(&a).frobenius_norm();
        let rows = || Instance::Matrices {
            a: rows_of(&m),
            b: rows_of(&m),
        };
        report.record("sqrt_reconstruction", trial, 1e-9 * (1.0 + a.frobenius_norm()) - err, rows);

        // Araki–Yamagami on X and a nearby or independent Y
        let y = if trial % 2 == 0 {
            random_matrix(&mut rng, k, d)
        } else {
            let size = 10f64.powf(rng.random_range(-4.0..0.0));
            &m + random_matrix(&mut rng, k, d).map(|v| v * size)
        };
        let lhs = s.sub(&psd_sqrt(&gram(&y))?).frobenius_norm();
        let rhs = std::f64::consts::SQRT_2 * (&m - &y).norm();
        report.record("araki_yamagami", trial, rhs - lhs, || Instance::Matrices {
            a: rows_of(&m),
            b: rows_of(&y),
        });

        // van Hemmen–Ando with A ≽ ηI, η ∈ (0, 1]
        let eta: f64 = rng.random_range(1e-3..=1.0);
        let a_eta = a.add(&SymMatrix::identity(d).scale(eta));
        let b = gram(&random_matrix(&mut rng, k, d));
        let lhs = psd_sqrt(&a_eta)?.sub(&psd_sqrt(&b)?).frobenius_norm();
        let rhs = a_eta.sub(&b).frobenius_norm() / eta;
        report.record("van_hemmen_ando", trial, rhs - lhs, || Instance::Matrices {
            a: a_eta.to_rows(),
            b: b.to_rows(),
        });

        // scaling: √(c a) = √c √a
        let c = 10f64.powf(rng.random_range(-2.0..2.0));
        let diff = psd_sqrt(&a.scale(c))?.sub(&s.scale(c.sqrt())).frobenius_norm();
        report.record("sqrt_scaling", trial, 1e-10 * (1.0 + c.sqrt() * s.frobenius_norm()) - diff, rows);
    }
    Ok(report)
}

fn random_point(rng: &mut SplitMix64, dim: usize, radius: f64) -> Vec<f64> {
    let r = radius * rng.random::<f64>();
    let mut v = normals(rng, dim);
    let n = norm(&v).max(1e-300);
    v.iter_mut().for_each(|x| *x *= r / n);
    v
}

/// Monotonicity of `∇φ` on random pairs in the ball of radius `radius`, with
/// the convexity constants fitted over the same pairs.
pub fn convexity_suite(pot: &Potential, n_pairs: usize, radius: f64, seed: u64) -> Result<SuiteReport> {
    let d = pot.dim();
    let mut report = SuiteReport::new(SuiteKind::Convexity);
    let mut pairs = Vec::with_capacity(n_pairs);
    for trial in 0..n_pairs {
        let mut rng = SplitMix64::keyed(seed, Stream::Suite, 2, trial as u64, 0);
        let x = random_point(&mut rng, d, radius);
        let y = random_point(&mut rng, d, radius);
        let inner = convexity_inner(pot, &x, &y)?;
        let scale = 1.0 + norm(&pot.grad(&x)?) + norm(&pot.grad(&y)?);
        report.record("gradient_monotone", trial, inner + 1e-12 * scale * scale, || Instance::Points {
            x: x.clone(),
            y: y.clone(),
        });
        pairs.push((x, y));
    }
    let fit = fit_convexity(pot, &pairs)?;
    report.record("positive_convexity_constant", n_pairs, fit.c1, || Instance::Potential {
        potential: pot.clone(),
    });
    report.convexity = Some(fit);
    Ok(report)
}

/// Growth-class check plus the local Lipschitz bound
/// `|∇φ(x) − ∇φ(y)| ≤ ũ (1 + |x|^ℓ + |y|^ℓ) |x − y|` with `ũ` from the class check.
pub fn class_check_suite(pot: &Potential, ell: u32, n_samples: usize, radius_range: (f64, f64), seed: u64) -> Result<SuiteReport> {
    let mut report = SuiteReport::new(SuiteKind::ClassCheck);
    let class = check_class(pot, ell, n_samples, radius_range, seed)?;
    report.record("growth_class", 0, if class.pass { 0.0 } else { -1.0 }, || Instance::Potential {
        potential: pot.clone(),
    });
    let d = pot.dim();
    let e = ell as i32;
    for trial in 0..n_samples {
        let mut rng = SplitMix64::keyed(seed, Stream::Suite, 3, trial as u64, 0);
        let x = random_point(&mut rng, d, radius_range.1);
        let y = random_point(&mut rng, d, radius_range.1);
        let gx = pot.grad(&x)?;
        let gy = pot.grad(&y)?;
        let lhs = norm(&gx.iter().zip(&gy).map(|(a, b)| a - b).collect::<Vec<_>>());
        let gap = norm(&x.iter().zip(&y).map(|(a, b)| a - b).collect::<Vec<_>>());
        let rhs = class.lipschitz_constant * (1.0 + norm(&x).powi(e) + norm(&y).powi(e)) * gap;
        report.record("local_lipschitz", trial + 1, rhs - lhs, || Instance::Points {
            x: x.clone(),
            y: y.clone(),
        });
    }
    report.class_report = Some(class);
    Ok(report)
}
