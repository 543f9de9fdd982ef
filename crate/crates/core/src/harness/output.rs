//! CSV rendering of experiment results and trajectory dumps.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dynamics::TrajectoryObserver;

use super::rate::{RateFit, RatePoint};

pub const CSV_HEADER: &str = "experiment,J,p,estimate,stderr,n_ok,n_failed";

/// One CSV row: the estimate at one ensemble size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub experiment: String,
    pub j: usize,
    pub p: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub n_ok: usize,
    pub n_failed: usize,
}

impl ExperimentRow {
    pub fn from_point(experiment: &str, p: f64, point: &RatePoint, n_ok: usize, n_failed: usize) -> Self {
        Self {
            experiment: experiment.to_string(),
            j: point.j,
            p,
            estimate: point.estimate,
            stderr: point.stderr,
            n_ok,
            n_failed,
        }
    }
}

/// Header, one line per row, then one `# fit:` comment line per fit.
///
/// Floats use the shortest round-trip representation, so equal results give
/// equal bytes.
pub fn format_csv(rows: &[ExperimentRow], fits: &[(&str, &RateFit)]) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{:e},{:e},{},{}",
            r.experiment, r.j, r.p, r.estimate, r.stderr, r.n_ok, r.n_failed
        );
    }
    for (name, fit) in fits {
        let _ = writeln!(
            out,
            "# fit {name}: slope={}, intercept={}, slope_stderr={}",
            fit.slope, fit.intercept, fit.slope_stderr
        );
    }
    out
}

/// Collects `(replicate, step, time, particle, system, x_1, …, x_d)` rows.
#[derive(Debug, Clone)]
pub struct TrajectoryDump {
    replicate: u64,
    dim: usize,
    body: String,
}

impl TrajectoryDump {
    pub fn new(replicate: u64, dim: usize) -> Self {
        Self {
            replicate,
            dim,
            body: String::new(),
        }
    }

    pub fn header(dim: usize) -> String {
        let mut h = String::from("replicate,step,time,particle,system");
        for k in 0..dim {
            let _ = write!(h, ",x{k}");
        }
        h.push('\n');
        h
    }

    pub fn into_body(self) -> String {
        self.body
    }

    fn push(&mut self, step: usize, time: f64, system: &str, positions: &[f64]) {
        for (j, x) in positions.chunks(self.dim).enumerate() {
            let _ = write!(self.body, "{},{step},{time},{j},{system}", self.replicate);
            for v in x {
                let _ = write!(self.body, ",{v}");
            }
            self.body.push('\n');
        }
    }
}

impl TrajectoryObserver for TrajectoryDump {
    fn observe(&mut self, step: usize, time: f64, ips: &[f64], meanfield: &[f64]) {
        self.push(step, time, "ips", ips);
        self.push(step, time, "mf", meanfield);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let rows = vec![ExperimentRow {
            experiment: "chaos".into(),
            j: 16,
            p: 2.0,
            estimate: 0.125,
            stderr: 0.01,
            n_ok: 10,
            n_failed: 0,
        }];
        let fit = RateFit {
            per_j_error: vec![],
            slope: -1.0,
            intercept: 0.5,
            slope_stderr: 0.1,
        };
        let s = format_csv(&rows, &[("chaos", &fit)]);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1], "chaos,16,2,1.25e-1,1e-2,10,0");
        assert_eq!(lines[2], "# fit chaos: slope=-1, intercept=0.5, slope_stderr=0.1");
    }

    #[test]
    fn dump_rows() {
        let mut d = TrajectoryDump::new(2, 1);
        d.observe(0, 0.0, &[1.0, 2.0], &[1.0, 2.0]);
        let body = d.into_body();
        assert_eq!(body.lines().count(), 4);
        assert!(body.starts_with("2,0,0,0,ips,1\n"));
    }
}
