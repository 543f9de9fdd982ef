//! Probability that a sample mean of i.i.d. non-negative variables exceeds a level.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{fill_normals, Stream};

use super::stats::Accumulator;

/// Seeded scalar law for the excursion experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarLaw {
    /// `|N(0, 1)|`
    AbsNormal,
    Constant { value: f64 },
}

impl ScalarLaw {
    pub fn mean(&self) -> f64 {
        match *self {
            ScalarLaw::AbsNormal => (2.0 / std::f64::consts::PI).sqrt(),
            ScalarLaw::Constant { value } => value,
        }
    }

    fn fill(&self, seed: u64, j: usize, trial: u64, out: &mut [f64]) {
        match *self {
            ScalarLaw::AbsNormal => {
                fill_normals(seed, Stream::Excursion, j as u64, trial, 0, out);
                out.iter_mut().for_each(|z| *z = z.abs());
            }
            ScalarLaw::Constant { value } => out.iter_mut().for_each(|z| *z = value),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcursionEstimate {
    pub j: usize,
    pub probability: f64,
    pub stderr: f64,
    pub trials: usize,
}

pub const MIN_EXCURSION_TRIALS: usize = 1000;

/// Fraction of `trials` draws of `(Z_1, …, Z_J)` whose mean is `≥ level`.
pub fn excursion_probability(law: ScalarLaw, level: f64, j: usize, trials: usize, seed: u64) -> Result<ExcursionEstimate> {
    if j == 0 {
        return Err(Error::invalid("J must be ≥ 1"));
    }
    if trials < MIN_EXCURSION_TRIALS {
        return Err(Error::invalid(format!("excursion needs ≥ {MIN_EXCURSION_TRIALS} trials, got {trials}")));
    }
    let hits: Vec<bool> = (0..trials as u64)
        .into_par_iter()
        .map_init(
            || vec![0.0; j],
            |buf, m| {
                law.fill(seed, j, m, buf);
                buf.iter().sum::<f64>() / j as f64 >= level
            },
        )
        .collect();
    let acc: Accumulator = hits.iter().map(|&h| f64::from(u8::from(h))).collect();
    Ok(ExcursionEstimate {
        j,
        probability: acc.mean(),
        stderr: acc.stderr(),
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_levels() {
        let p = excursion_probability(ScalarLaw::AbsNormal, 0.0, 8, 1000, 1).unwrap();
        assert_eq!(p.probability, 1.0);
        let p = excursion_probability(ScalarLaw::Constant { value: 2.0 }, 2.5, 8, 1000, 1).unwrap();
        assert_eq!(p.probability, 0.0);
    }

    #[test]
    fn too_few_trials() {
        assert!(excursion_probability(ScalarLaw::AbsNormal, 1.0, 4, 999, 0).is_err());
    }

    #[test]
    fn decays_with_sample_size() {
        let level = ScalarLaw::AbsNormal.mean() + 0.5;
        let ps: Vec<f64> = [4, 16, 64]
            .iter()
            .map(|&j| excursion_probability(ScalarLaw::AbsNormal, level, j, 20_000, 5).unwrap().probability)
            .collect();
        assert!(ps[0] > ps[1] && ps[1] > ps[2], "{ps:?}");
    }
}
