//! Power-law rate fitting in log-log coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub j: usize,
    pub estimate: f64,
    pub stderr: f64,
}

impl RatePoint {
    pub fn new(j: usize, estimate: f64) -> Self {
        Self { j, estimate, stderr: 0.0 }
    }
}

/// Least-squares line `log(estimate) = intercept + slope · log(J)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub per_j_error: Vec<RatePoint>,
    pub slope: f64,
    pub intercept: f64,
    /// Residual-based standard error of the slope; 0 for ≤ 2 points or exact fits.
    pub slope_stderr: f64,
}

pub fn fit_log_rate(points: &[RatePoint]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::invalid(format!("rate fit needs at least 3 points, got {}", points.len())));
    }
    for (index, p) in points.iter().enumerate() {
        if !(p.estimate > 0.0) || p.j == 0 {
            return Err(Error::NonPositiveEstimate {
                index,
                value: p.estimate,
            });
        }
    }
    let xs: Vec<f64> = points.iter().map(|p| (p.j as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.estimate.ln()).collect();
    let n = xs.len() as f64;
    let x_bar = xs.iter().sum::<f64>() / n;
    let y_bar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - x_bar).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("rate fit needs at least two distinct J values"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - x_bar) * (y - y_bar)).sum();
    let slope = sxy / sxx;
    let intercept = y_bar - slope * x_bar;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let slope_stderr = (rss / (n - 2.0) / sxx).sqrt();
    Ok(RateFit {
        per_j_error: points.to_vec(),
        slope,
        intercept,
        slope_stderr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pts(v: &[(usize, f64)]) -> Vec<RatePoint> {
        v.iter().map(|&(j, e)| RatePoint::new(j, e)).collect()
    }

    #[test]
    fn exact_power_laws() {
        let fit = fit_log_rate(&pts(&[(1, 1.0), (2, 0.5), (4, 0.25)])).unwrap();
        assert_abs_diff_eq!(fit.slope, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.intercept, 0.0, epsilon = 1e-12);
        assert!(fit.slope_stderr < 1e-7);

        let fit = fit_log_rate(&pts(&[(10, 1.0), (100, 0.01), (1000, 1e-4)])).unwrap();
        assert_abs_diff_eq!(fit.slope, -2.0, epsilon = 1e-12);
    }

    #[test]
    fn preconditions() {
        assert!(fit_log_rate(&pts(&[(1, 1.0), (4, 1.0 / 16.0)])).is_err());
        assert!(matches!(
            fit_log_rate(&pts(&[(1, 1.0), (2, 0.0), (4, 0.25)])),
            Err(Error::NonPositiveEstimate { index: 1, .. })
        ));
    }

    #[test]
    fn noisy_fit_has_positive_stderr() {
        let fit = fit_log_rate(&pts(&[(1, 1.0), (2, 0.6), (4, 0.2), (8, 0.14)])).unwrap();
        assert!(fit.slope < 0.0);
        assert!(fit.slope_stderr > 0.0);
    }
}
