use crate::error::{Error, Result};
use crate::linalg::{frobenius_norm, psd_sqrt, SymMatrix, PSD_CLAMP_REL};
use crate::measures::covariance_of;
use crate::potentials::Potential;
use crate::rng::NoiseSource;

use super::{CoupledEnsembles, CovariancePath, EnsembleState};

/// `b(x, C) = −C ∇φ(x)`.
pub fn drift(pot: &Potential, x: &[f64], cov: &SymMatrix) -> Result<Vec<f64>> {
    if cov.dim() != pot.dim() {
        return Err(Error::DimMismatch {
            expected: pot.dim(),
            found: cov.dim(),
        });
    }
    let g = pot.grad(x)?;
    Ok(cov.mul_vec(&g).into_iter().map(|v| -v).collect())
}

/// `σ(C) = √(2C)`.
pub fn diffusion(cov: &SymMatrix) -> Result<SymMatrix> {
    psd_sqrt(&cov.scale(2.0))
}

/// `√(2C)` together with the smallest eigenvalue of `C`, from one decomposition.
pub(crate) fn diffusion_with_min(cov: &SymMatrix) -> Result<(SymMatrix, f64)> {
    let spectrum = cov.spectrum()?;
    let clamp = PSD_CLAMP_REL * frobenius_norm(cov);
    let lo = spectrum.min();
    if lo < -clamp {
        return Err(Error::NotPsd {
            min_eigenvalue: lo,
            clamp,
        });
    }
    Ok((spectrum.map(|l| (2.0 * l.max(0.0)).sqrt()), lo))
}

/// Scratch buffers for the per-particle update.
pub(crate) struct StepScratch {
    grad: Vec<f64>,
    drift: Vec<f64>,
    kick: Vec<f64>,
    pub(crate) noise: Vec<f64>,
}

impl StepScratch {
    pub(crate) fn new(dim: usize) -> Self {
        Self {
            grad: vec![0.0; dim],
            drift: vec![0.0; dim],
            kick: vec![0.0; dim],
            noise: vec![0.0; dim],
        }
    }
}

/// `x ← x − dt·C∇φ(x) + √dt·root·z`, with `z` taken from `scratch.noise`.
/// Returns false if the update produced a non-finite coordinate.
#[inline]
pub(crate) fn advance_particle(
    pot: &Potential,
    x: &mut [f64],
    cov: &SymMatrix,
    root: &SymMatrix,
    dt: f64,
    scratch: &mut StepScratch,
) -> bool {
    let sqrt_dt = dt.sqrt();
    pot.grad_into(x, &mut scratch.grad);
    cov.mul_vec_into(&scratch.grad, &mut scratch.drift);
    root.mul_vec_into(&scratch.noise, &mut scratch.kick);
    let mut finite = true;
    for ((xk, drift), kick) in x.iter_mut().zip(&scratch.drift).zip(&scratch.kick) {
        *xk += -dt * drift + sqrt_dt * kick;
        finite &= xk.is_finite();
    }
    finite
}

fn check_gauss(state: &EnsembleState, gauss: &[f64]) -> Result<()> {
    if gauss.len() != state.positions.len() {
        return Err(Error::DimMismatch {
            expected: state.positions.len(),
            found: gauss.len(),
        });
    }
    Ok(())
}

fn advance_all(
    pot: &Potential,
    state: &EnsembleState,
    cov: &SymMatrix,
    root: &SymMatrix,
    dt: f64,
    gauss: &[f64],
) -> Result<EnsembleState> {
    let d = state.dim;
    let mut positions = state.positions.clone();
    let mut scratch = StepScratch::new(d);
    for (x, z) in positions.chunks_mut(d).zip(gauss.chunks(d)) {
        scratch.noise.copy_from_slice(z);
        if !advance_particle(pot, x, cov, root, dt, &mut scratch) {
            return Err(Error::NonFinite {
                step: (state.time / dt).round() as usize,
            });
        }
    }
    Ok(EnsembleState {
        time: state.time + dt,
        dim: d,
        positions,
    })
}

fn check_pot(pot: &Potential, state: &EnsembleState) -> Result<()> {
    if pot.dim() != state.dim {
        return Err(Error::DimMismatch {
            expected: pot.dim(),
            found: state.dim,
        });
    }
    Ok(())
}

/// One Euler–Maruyama step of the IPS; `C(μ^J)` is taken from the pre-step state.
pub fn step_ips(pot: &Potential, state: &EnsembleState, dt: f64, gauss: &[f64]) -> Result<EnsembleState> {
    check_pot(pot, state)?;
    check_gauss(state, gauss)?;
    let (_, cov) = covariance_of(state.dim, &state.positions);
    let (root, _) = diffusion_with_min(&cov)?;
    advance_all(pot, state, &cov, &root, dt, gauss)
}

/// One Euler–Maruyama step of the mean-field particles, coefficients read
/// from `path` at the state's time.
pub fn step_meanfield(
    pot: &Potential,
    state: &EnsembleState,
    path: &CovariancePath,
    dt: f64,
    gauss: &[f64],
) -> Result<EnsembleState> {
    check_pot(pot, state)?;
    check_gauss(state, gauss)?;
    let coeffs = path.coefficients_at(state.time)?;
    advance_all(pot, state, &coeffs.cov, &coeffs.root, dt, gauss)
}

/// Advances both systems with the same normal block, drawn once from `noise`
/// at the current step index.
pub fn step_coupled(
    pot: &Potential,
    coupled: &CoupledEnsembles,
    path: &CovariancePath,
    dt: f64,
    noise: &NoiseSource,
) -> Result<CoupledEnsembles> {
    let gauss = noise.step_block(coupled.step_index, coupled.ips.n_particles(), coupled.ips.dim);
    let ips = step_ips(pot, &coupled.ips, dt, &gauss)?;
    let meanfield = step_meanfield(pot, &coupled.meanfield, path, dt, &gauss)?;
    Ok(CoupledEnsembles {
        ips,
        meanfield,
        step_index: coupled.step_index + 1,
    })
}
