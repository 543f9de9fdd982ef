//! Stopping-time monitors evaluated on the recorded step times.
//!
//! The excursion monitors fire at the first time `(1/J) Σ |X^j_t|^r ≥ R^r`,
//! i.e. `W_r(μ^J_t, δ₀) ≥ R`; the coupling monitor fires when the identity
//! coupling bound `((1/J) Σ |X^j_t − X̄^j_t|^r)^{1/r}` reaches `ε`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{dist_pow, moment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonitorTag {
    IpsExcursion,
    MeanfieldExcursion,
    CouplingDistance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MonitorKind {
    IpsExcursion { r: f64, radius: f64 },
    MeanfieldExcursion { r: f64, radius: f64 },
    CouplingDistance { r: f64, eps: f64 },
}

impl MonitorKind {
    pub fn tag(&self) -> MonitorTag {
        match self {
            MonitorKind::IpsExcursion { .. } => MonitorTag::IpsExcursion,
            MonitorKind::MeanfieldExcursion { .. } => MonitorTag::MeanfieldExcursion,
            MonitorKind::CouplingDistance { .. } => MonitorTag::CouplingDistance,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (r, level) = match *self {
            MonitorKind::IpsExcursion { r, radius } | MonitorKind::MeanfieldExcursion { r, radius } => (r, radius),
            MonitorKind::CouplingDistance { r, eps } => (r, eps),
        };
        if !(r >= 1.0) {
            return Err(Error::invalid(format!("monitor exponent r must be ≥ 1, got {r}")));
        }
        if !(level > 0.0) {
            return Err(Error::invalid("monitor threshold must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingRecord {
    pub triggered: bool,
    pub hit_time: Option<f64>,
    pub which: MonitorTag,
}

/// Incremental monitor; feed it every recorded time in order.
#[derive(Debug, Clone)]
pub struct StoppingMonitor {
    kind: MonitorKind,
    hit_time: Option<f64>,
}

impl StoppingMonitor {
    pub fn new(kind: MonitorKind) -> Result<Self> {
        kind.validate()?;
        Ok(Self { kind, hit_time: None })
    }

    /// `ips` and `meanfield` are row-major `J × dim` positions at `time`.
    pub fn observe(&mut self, time: f64, dim: usize, ips: &[f64], meanfield: &[f64]) {
        if self.hit_time.is_some() {
            return;
        }
        let hit = match self.kind {
            MonitorKind::IpsExcursion { r, radius } => moment(dim, ips, r) >= radius.powf(r),
            MonitorKind::MeanfieldExcursion { r, radius } => moment(dim, meanfield, r) >= radius.powf(r),
            MonitorKind::CouplingDistance { r, eps } => {
                let n = ips.len() / dim;
                let total: f64 = ips
                    .chunks_exact(dim)
                    .zip(meanfield.chunks_exact(dim))
                    .map(|(x, y)| dist_pow(x, y, r))
                    .sum();
                total / n as f64 >= eps.powf(r)
            }
        };
        if hit {
            self.hit_time = Some(time);
        }
    }

    pub fn record(&self) -> StoppingRecord {
        StoppingRecord {
            triggered: self.hit_time.is_some(),
            hit_time: self.hit_time,
            which: self.kind.tag(),
        }
    }
}

/// Runs one monitor over a sequence of `(time, ips, meanfield)` snapshots.
pub fn stopping_monitor<'a>(
    kind: MonitorKind,
    dim: usize,
    states: impl IntoIterator<Item = (f64, &'a [f64], &'a [f64])>,
) -> Result<StoppingRecord> {
    let mut monitor = StoppingMonitor::new(kind)?;
    for (t, ips, mf) in states {
        monitor.observe(t, dim, ips, mf);
        if monitor.hit_time.is_some() {
            break;
        }
    }
    Ok(monitor.record())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_never_triggers() {
        let zeros = vec![0.0; 6];
        let snaps = (0..10).map(|k| (k as f64 * 0.1, zeros.as_slice(), zeros.as_slice()));
        let rec = stopping_monitor(MonitorKind::IpsExcursion { r: 2.0, radius: 0.5 }, 2, snaps).unwrap();
        assert!(!rec.triggered);
        assert_eq!(rec.hit_time, None);
        assert_eq!(rec.which, MonitorTag::IpsExcursion);
    }

    #[test]
    fn threshold_equality_triggers_at_first_time() {
        let ips = vec![1.0, -1.0];
        let snaps = vec![(0.0, ips.as_slice(), ips.as_slice()), (0.1, ips.as_slice(), ips.as_slice())];
        let rec = stopping_monitor(MonitorKind::MeanfieldExcursion { r: 2.0, radius: 1.0 }, 1, snaps).unwrap();
        assert!(rec.triggered);
        assert_eq!(rec.hit_time, Some(0.0));
    }

    #[test]
    fn coupling_distance_uses_identity_pairing() {
        let ips = vec![0.0, 0.0];
        let near = vec![0.1, -0.1];
        let far = vec![1.0, 1.0];
        let snaps = vec![(0.0, ips.as_slice(), near.as_slice()), (0.5, ips.as_slice(), far.as_slice())];
        let rec = stopping_monitor(MonitorKind::CouplingDistance { r: 2.0, eps: 0.5 }, 1, snaps).unwrap();
        assert_eq!(rec.hit_time, Some(0.5));
    }

    #[test]
    fn invalid_parameters() {
        assert!(StoppingMonitor::new(MonitorKind::IpsExcursion { r: 0.5, radius: 1.0 }).is_err());
        assert!(StoppingMonitor::new(MonitorKind::CouplingDistance { r: 2.0, eps: 0.0 }).is_err());
    }
}
