use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Result};
use chrono::Utc;
use serde_json::json;
use toml::{Table, Value};

use langevin_chaos::dynamics::{gaussian_meanfield_path, picard_covariance_path, uniform_grid, PicardOptions};
use langevin_chaos::harness::{
    calibrate_radius, class_check_suite, convexity_suite, covariance_mc_rate, dt_halving_check,
    estimate_chaos_error_observed, excursion_decay_experiment, excursion_probability, fit_log_rate, format_csv,
    meanfield_reference, psd_property_suite, sampling_error_rate, stability_property_suite, ExperimentRow, RateFit,
    RatePoint, SuiteKind, TrajectoryDump,
};
use langevin_chaos::{Error, Potential};

use crate::config::{apply_override, load_table, FileConfig};
use crate::manifest::{write_atomic, RunManifest};

pub struct Context {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub overrides: Vec<(String, String)>,
    pub out_dir: PathBuf,
    pub dump_trajectories: bool,
}

/// Maps an error to the documented exit code.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(
            Error::TooManyFailedReplicates { .. }
            | Error::NoConvergence(_)
            | Error::CovarianceCollapse { .. }
            | Error::NonPositiveEstimate { .. },
        ) => 3,
        _ => 2,
    }
}

impl Context {
    /// Config file (if any) plus `--seed` and `--key=value` overrides.
    fn table(&self, required: bool) -> Result<Table> {
        let mut table = match &self.config {
            Some(path) => load_table(path)?,
            None if required => bail!("missing --config <file>"),
            None => Table::new(),
        };
        for (key, value) in &self.overrides {
            apply_override(&mut table, key, value)?;
        }
        if let Some(seed) = self.seed {
            let seed = i64::try_from(seed).map_err(|_| anyhow::anyhow!("--seed must fit in a signed 64-bit integer"))?;
            table.insert("seed".into(), Value::Integer(seed));
        }
        Ok(table)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

struct Run<'a> {
    ctx: &'a Context,
    experiment: &'static str,
    table: Table,
    seed: u64,
    started: String,
    outputs: Vec<PathBuf>,
}

impl<'a> Run<'a> {
    fn start(ctx: &'a Context, experiment: &'static str, table: Table, seed: u64) -> Self {
        Self {
            ctx,
            experiment,
            table,
            seed,
            started: Utc::now().to_rfc3339(),
            outputs: Vec::new(),
        }
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.ctx.path(name);
        write_atomic(&path, contents.as_bytes())?;
        self.outputs.push(path.clone());
        Ok(path)
    }

    fn write_csv(&mut self, rows: &[ExperimentRow], fits: &[(&str, &RateFit)]) -> Result<PathBuf> {
        let path = self.write(&format!("{}.csv", self.experiment), &format_csv(rows, fits))?;
        println!("wrote {}", path.display());
        Ok(path)
    }

    fn finish(self, failed_replicates: usize, summary: serde_json::Value) -> Result<()> {
        let path = self.ctx.path(&format!("{}.manifest.json", self.experiment));
        RunManifest {
            experiment: self.experiment.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: self.table,
            seed: self.seed,
            started: self.started,
            finished: Utc::now().to_rfc3339(),
            outputs: self.outputs,
            failed_replicates,
            summary,
        }
        .write(&path)?;
        println!("wrote {}", path.display());
        Ok(())
    }
}

fn print_fit(label: &str, fit: &RateFit, reference: f64) {
    println!(
        "{label}: slope {:.4} ± {:.4} (reference {reference}), intercept {:.4}",
        fit.slope, fit.slope_stderr, fit.intercept
    );
}

fn fit_json(fit: &RateFit) -> serde_json::Value {
    json!({ "slope": fit.slope, "intercept": fit.intercept, "slope_stderr": fit.slope_stderr })
}

pub fn rate_chaos(ctx: &Context) -> Result<u8> {
    let table = ctx.table(true)?;
    let file = FileConfig::from_table(&table)?;
    let cfg = file.rate_experiment()?;
    let mut run = Run::start(ctx, "rate_chaos", table, file.seed());
    let reference = meanfield_reference(&cfg)?;
    if let Some(pic) = &reference.picard {
        println!(
            "fixed-point path: {} iterations, last gap {:.3e}, n = {}",
            pic.iterations,
            pic.last_gap(),
            pic.n_particles
        );
    }
    let max_dump = if ctx.dump_trajectories {
        file.dump.max_replicates.unwrap_or(1)
    } else {
        0
    };
    let d = cfg.dim();
    let mut estimates = Vec::with_capacity(cfg.j_values.len());
    for &j in &cfg.j_values {
        let (est, dumps) =
            estimate_chaos_error_observed(&cfg, &reference.path, j, |rep| (rep < max_dump).then(|| TrajectoryDump::new(rep, d)))?;
        if !dumps.is_empty() {
            let mut body = TrajectoryDump::header(d);
            dumps.into_iter().for_each(|t| body.push_str(&t.into_body()));
            run.write(&format!("trajectories_J{j}.csv"), &body)?;
        }
        println!("J = {j:>5}: {:.6e} ± {:.2e} ({} failed)", est.estimate, est.stderr, est.n_failed);
        estimates.push(est);
    }
    let points: Vec<RatePoint> = estimates
        .iter()
        .map(|e| RatePoint {
            j: e.j,
            estimate: e.estimate,
            stderr: e.stderr,
        })
        .collect();
    let fit = fit_log_rate(&points)?;
    print_fit("chaos rate", &fit, -cfg.p / 2.0);
    let mut rows: Vec<ExperimentRow> = estimates
        .iter()
        .zip(&points)
        .map(|(e, pt)| ExperimentRow::from_point("rate_chaos", cfg.p, pt, e.n_ok, e.n_failed))
        .collect();
    let mut summary = json!({
        "fit": fit_json(&fit),
        "cov_floor_hits": estimates.iter().map(|e| e.cov_floor_hits).sum::<usize>(),
    });
    if let Some(pic) = &reference.picard {
        summary["picard"] = json!({ "iterations": pic.iterations, "gaps": pic.gaps, "converged": pic.converged });
    }
    let failed = estimates.iter().map(|e| e.n_failed).sum();

    if file.check.dt_halving.unwrap_or(false) {
        let check = dt_halving_check(&cfg)?;
        print_fit("base (2 sub-increments)", &check.base.fit, -cfg.p / 2.0);
        print_fit("dt / 2", &check.halved.fit, -cfg.p / 2.0);
        println!(
            "dt-halving slope shift {:.4} vs stderr {:.4}: {}",
            check.slope_shift(),
            check.base.fit.slope_stderr,
            if check.passes() { "ok" } else { "EXCEEDS" }
        );
        rows.extend(check.base.rows("rate_chaos_dt_base", cfg.p));
        rows.extend(check.halved.rows("rate_chaos_dt_half", cfg.p));
        summary["dt_halving"] = json!({
            "base": fit_json(&check.base.fit),
            "halved": fit_json(&check.halved.fit),
            "shift": check.slope_shift(),
            "passes": check.passes(),
        });
        let fits = [("rate_chaos", &fit), ("rate_chaos_dt_base", &check.base.fit), ("rate_chaos_dt_half", &check.halved.fit)];
        run.write_csv(&rows, &fits)?;
    } else {
        run.write_csv(&rows, &[("rate_chaos", &fit)])?;
    }
    run.finish(failed, summary)?;
    Ok(0)
}

pub fn cov_rate(ctx: &Context) -> Result<u8> {
    let table = ctx.table(true)?;
    let file = FileConfig::from_table(&table)?;
    let p = file.p()?;
    if !(p >= 1.0) {
        bail!("invalid `p`: must be ≥ 1");
    }
    let rho0 = file.rho0()?;
    let j_values = file.j_values()?;
    let with_sqrt = file.cov.sqrt.unwrap_or(false);
    let report = covariance_mc_rate(&rho0, p, &j_values, file.replicates()?, file.seed(), with_sqrt)?;
    let mut run = Run::start(ctx, "cov_rate", table, file.seed());
    for e in &report.estimates {
        println!("J = {:>5}: {:.6e} ± {:.2e}", e.j, e.estimate, e.stderr);
    }
    print_fit("covariance rate", &report.fit, -p / 2.0);
    let mut fits = vec![("cov_rate", &report.fit)];
    let mut summary = json!({ "fit": fit_json(&report.fit) });
    if let Some(f) = &report.sqrt_fit {
        print_fit("square-root covariance rate", f, -p / 2.0);
        fits.push(("cov_sqrt_rate", f));
        summary["sqrt_fit"] = fit_json(f);
    }
    run.write_csv(&report.rows(p), &fits)?;
    run.finish(0, summary)?;
    Ok(0)
}

fn positive_fit(points: &[RatePoint]) -> Option<RateFit> {
    points.iter().all(|p| p.estimate > 0.0).then(|| fit_log_rate(points).ok()).flatten()
}

pub fn excursion(ctx: &Context) -> Result<u8> {
    let mut table = ctx.table(true)?;
    if !table.contains_key("p") {
        // unused by excursions; keeps the shared validation happy
        table.insert("p".into(), Value::Float(2.0));
    }
    let file = FileConfig::from_table(&table)?;
    let j_values = file.j_values()?;
    let replicates = file.replicates()?;
    let ex = &file.excursion;
    let mode = ex.mode.clone().unwrap_or_else(|| "trajectory".into());
    let (rows, fits, summary, failed) = match mode.as_str() {
        "iid" => {
            let law = file.scalar_law()?;
            let level = ex.level.unwrap_or_else(|| law.mean() + ex.level_offset.unwrap_or(0.5));
            let mut rows = Vec::new();
            let mut points = Vec::new();
            for &j in &j_values {
                let e = excursion_probability(law, level, j, replicates, file.seed())?;
                println!("J = {j:>5}: P = {:.6e} ± {:.2e}", e.probability, e.stderr);
                let pt = RatePoint {
                    j,
                    estimate: e.probability,
                    stderr: e.stderr,
                };
                rows.push(ExperimentRow::from_point("excursion_iid", 0.0, &pt, e.trials, 0));
                points.push(pt);
            }
            let fit = positive_fit(&points);
            let summary = json!({ "level": level, "fit": fit.as_ref().map(fit_json) });
            (rows, fit.map(|f| vec![("excursion_iid", f)]).unwrap_or_default(), summary, 0)
        }
        "trajectory" => {
            let cfg = file.rate_experiment()?;
            let r = ex.r.unwrap_or(2.0);
            let reference = meanfield_reference(&cfg)?;
            let radius = match ex.radius {
                Some(radius) => radius,
                None => calibrate_radius(
                    &cfg,
                    &reference.path,
                    r,
                    ex.pilot_particles.unwrap_or(20_000),
                    ex.radius_factor.unwrap_or(2.0),
                )?,
            };
            println!("excursion radius R = {radius:.6}");
            let freqs = excursion_decay_experiment(&cfg, &reference.path, r, radius)?;
            let mut rows = Vec::new();
            let (mut ips_pts, mut mf_pts) = (Vec::new(), Vec::new());
            for f in &freqs {
                println!(
                    "J = {:>5}: IPS {:.4} ± {:.4}, mean-field {:.4} ± {:.4}",
                    f.j, f.ips, f.ips_stderr, f.meanfield, f.meanfield_stderr
                );
                let ips = RatePoint {
                    j: f.j,
                    estimate: f.ips,
                    stderr: f.ips_stderr,
                };
                let mf = RatePoint {
                    j: f.j,
                    estimate: f.meanfield,
                    stderr: f.meanfield_stderr,
                };
                rows.push(ExperimentRow::from_point("excursion_ips", r, &ips, f.n_ok, f.n_failed));
                rows.push(ExperimentRow::from_point("excursion_mf", r, &mf, f.n_ok, f.n_failed));
                ips_pts.push(ips);
                mf_pts.push(mf);
            }
            let mut fits = Vec::new();
            if let Some(f) = positive_fit(&ips_pts) {
                fits.push(("excursion_ips", f));
            }
            if let Some(f) = positive_fit(&mf_pts) {
                fits.push(("excursion_mf", f));
            }
            let failed = freqs.iter().map(|f| f.n_failed).sum();
            (rows, fits, json!({ "radius": radius, "r": r }), failed)
        }
        other => bail!("invalid `excursion.mode`: {other:?} (expected \"trajectory\" or \"iid\")"),
    };
    let mut run = Run::start(ctx, "excursion", table, file.seed());
    let fit_refs: Vec<(&str, &RateFit)> = fits.iter().map(|(n, f)| (*n, f)).collect();
    run.write_csv(&rows, &fit_refs)?;
    run.finish(failed, summary)?;
    Ok(0)
}

pub fn sampling_error(ctx: &Context) -> Result<u8> {
    let table = ctx.table(true)?;
    let file = FileConfig::from_table(&table)?;
    let setup = file.sampling_setup()?;
    let report = sampling_error_rate(&setup, &file.j_values()?)?;
    let mut run = Run::start(ctx, "sampling_error", table, file.seed());
    println!("reference value {:.6}", report.reference_value);
    for e in &report.estimates {
        println!("J = {:>5}: {:.6e} ± {:.2e}", e.j, e.estimate, e.stderr);
    }
    print_fit("sampling error rate", &report.fit, -0.5);
    run.write_csv(&report.rows(setup.p), &[("sampling_error", &report.fit)])?;
    let failed = report.estimates.iter().map(|e| e.n_failed).sum();
    run.finish(failed, json!({ "fit": fit_json(&report.fit), "reference_value": report.reference_value }))?;
    Ok(0)
}

fn suite_potential(file: &FileConfig) -> Result<Potential> {
    if file.potential.kind.is_none() && file.dim.is_none() {
        return Ok(Potential::standard_quadratic(2));
    }
    file.potential()
}

pub fn suite(ctx: &Context, which: SuiteKind) -> Result<u8> {
    let table = ctx.table(false)?;
    let file = FileConfig::from_table(&table)?;
    let s = &file.suite;
    let seed = file.seed();
    let report = match which {
        SuiteKind::Stability => {
            stability_property_suite(s.trials.unwrap_or(10_000), s.dim_max.unwrap_or(3), s.j_max.unwrap_or(8), seed)?
        }
        SuiteKind::Psd => psd_property_suite(s.trials.unwrap_or(10_000), s.dim_max.unwrap_or(6), seed)?,
        SuiteKind::Convexity => convexity_suite(&suite_potential(&file)?, s.trials.unwrap_or(10_000), s.radius.unwrap_or(5.0), seed)?,
        SuiteKind::ClassCheck => {
            let pot = suite_potential(&file)?;
            let ell = s.ell.unwrap_or(pot.ell());
            class_check_suite(&pot, ell, s.trials.unwrap_or(1000), (s.radius_lo.unwrap_or(1.0), s.radius_hi.unwrap_or(100.0)), seed)?
        }
    };
    let name = serde_json::to_value(which)?.as_str().unwrap_or("suite").to_string();
    let mut text = String::new();
    let _ = write!(
        text,
        "{name} suite: {} checks, {} violations, worst slack {:.3e}",
        report.n_checks, report.n_violations, report.worst_slack
    );
    println!("{text}");
    if let Some(fit) = &report.convexity {
        println!(
            "convexity: c1 = {:.6}, c2 = {:.6}, monotonicity modulus = {:.6} over {} pairs",
            fit.c1, fit.c2, fit.monotonicity_modulus, fit.n_pairs
        );
    }
    if let Some(class) = &report.class_report {
        println!(
            "class check (ell = {}): pass = {}, local Lipschitz constant = {:.6}",
            class.ell, class.pass, class.lipschitz_constant
        );
    }
    let report_path = ctx.path(&format!("suite_{name}.json"));
    write_atomic(&report_path, serde_json::to_string_pretty(&report)?.as_bytes())?;
    println!("wrote {}", report_path.display());
    if let Some(v) = &report.violation {
        let path = ctx.path(&format!("suite_{name}_violation.json"));
        write_atomic(&path, serde_json::to_string_pretty(v)?.as_bytes())?;
        eprintln!("violation of `{}` (slack {:.3e}) written to {}", v.check, v.slack, path.display());
        return Ok(1);
    }
    Ok(0)
}

fn path_csv(path: &langevin_chaos::dynamics::CovariancePath) -> String {
    let d = path.dim();
    let mut out = String::from("time");
    for i in 0..d {
        let _ = write!(out, ",mean_{i}");
    }
    for i in 0..d {
        for j in i..d {
            let _ = write!(out, ",cov_{i}_{j}");
        }
    }
    out.push('\n');
    for k in 0..path.len() {
        let node = path.node(k);
        let _ = write!(out, "{}", path.grid()[k]);
        for m in &node.mean {
            let _ = write!(out, ",{m}");
        }
        for i in 0..d {
            for j in i..d {
                let _ = write!(out, ",{}", node.cov.get(i, j));
            }
        }
        out.push('\n');
    }
    out
}

pub fn picard_path(ctx: &Context) -> Result<u8> {
    let table = ctx.table(true)?;
    let file = FileConfig::from_table(&table)?;
    let pot = file.potential()?;
    let rho0 = file.rho0()?;
    let sde = file.sde()?;
    let settings = file.picard();
    let grid = uniform_grid(sde.dt, sde.n_steps());
    let mut opts = PicardOptions::new(settings.n_particles, settings.max_iter, settings.tol, file.seed());
    opts.cov_floor = sde.cov_floor;
    let outcome = picard_covariance_path(&pot, &rho0.sampler()?, &grid, &opts)?;
    println!(
        "converged in {} iterations, gaps {:?}",
        outcome.iterations,
        outcome.gaps.iter().map(|g| format!("{g:.3e}")).collect::<Vec<_>>()
    );
    let mut summary = json!({ "iterations": outcome.iterations, "gaps": outcome.gaps, "n_particles": outcome.n_particles });
    if let Potential::Quadratic { precision, center, .. } = &pot {
        let exact = gaussian_meanfield_path(precision, center, &rho0.mean, &rho0.cov, &grid)?;
        let gap = outcome.path.sup_cov_distance(&exact)?;
        println!("sup distance to the closed-form path: {gap:.3e}");
        summary["closed_form_distance"] = json!(gap);
    }
    let mut run = Run::start(ctx, "picard_path", table, file.seed());
    let p = run.write("picard_path.csv", &path_csv(&outcome.path))?;
    println!("wrote {}", p.display());
    run.finish(0, summary)?;
    Ok(0)
}
