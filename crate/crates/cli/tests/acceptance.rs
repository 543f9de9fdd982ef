//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero if any fail.
//!
//! The heavy criteria (chaos rates, Picard) take a few minutes in release-like
//! builds; `ACCEPTANCE_ONLY=3,9` restricts the run to the listed criteria.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use langevin_chaos::dynamics::{gaussian_meanfield_path, picard_covariance_path, uniform_grid, PicardOptions, SdeConfig};
use langevin_chaos::harness::{
    covariance_mc_rate, dt_halving_check, excursion_probability, psd_property_suite, run_chaos_rate,
    sampling_error_rate, stability_property_suite, Observable, PicardSettings, RateExperimentConfig, SamplingSetup,
    ScalarLaw,
};
use langevin_chaos::linalg::{frobenius_norm, invert_spd};
use langevin_chaos::{GaussianSpec, Potential, SymMatrix};

type Outcome = Result<(bool, String), String>;
type Criterion = (usize, &'static str, fn() -> Outcome);

fn psd_suite() -> Outcome {
    let report = psd_property_suite(10_000, 6, 1).map_err(|e| e.to_string())?;
    Ok((
        report.passed(),
        format!("{} checks, {} violations, worst slack {:.3e}", report.n_checks, report.n_violations, report.worst_slack),
    ))
}

fn stability_suite() -> Outcome {
    let report = stability_property_suite(10_000, 3, 8, 2).map_err(|e| e.to_string())?;
    Ok((
        report.passed(),
        format!("{} checks, {} violations, worst slack {:.3e}", report.n_checks, report.n_violations, report.worst_slack),
    ))
}

fn covariance_rate() -> Outcome {
    let js = [16, 32, 64, 128, 256, 512, 1024];
    let report = covariance_mc_rate(&GaussianSpec::standard(1), 2.0, &js, 2000, 7, false).map_err(|e| e.to_string())?;
    let first = &report.estimates[0];
    let exact = (2.0 * 16.0 - 1.0) / 256.0;
    let bracket = (first.estimate - exact).abs() <= 3.0 * first.stderr;
    let slope = report.fit.slope;
    Ok((
        bracket && (-1.25..=-0.75).contains(&slope),
        format!(
            "J=16 {:.4} ± {:.4} vs {exact:.4}; slope {slope:.3} ± {:.3}",
            first.estimate, first.stderr, report.fit.slope_stderr
        ),
    ))
}

fn quadratic_rate_config() -> RateExperimentConfig {
    let sde = SdeConfig::new(1e-3, 1.0, 20240611).expect("valid sde");
    RateExperimentConfig {
        potential: Potential::standard_quadratic(2),
        p: 2.0,
        j_values: vec![8, 16, 32, 64, 128, 256],
        replicates: 100,
        sde,
        rho0: GaussianSpec::new(vec![1.0, 1.0], SymMatrix::identity(2)).expect("valid law"),
        picard: PicardSettings::default(),
    }
}

fn quadratic_rate() -> Outcome {
    let check = dt_halving_check(&quadratic_rate_config()).map_err(|e| e.to_string())?;
    let fit = &check.base.fit;
    Ok((
        (-1.30..=-0.70).contains(&fit.slope) && check.passes(),
        format!(
            "slope {:.3} ± {:.3}; halved dt slope {:.3} (shift {:.4})",
            fit.slope,
            fit.slope_stderr,
            check.halved.fit.slope,
            check.slope_shift()
        ),
    ))
}

fn quartic_rate() -> Outcome {
    let sde = SdeConfig::new(1e-3, 1.0, 20240612).expect("valid sde");
    let cfg = RateExperimentConfig {
        potential: Potential::even_power(2, 1.0, vec![0.0], 1.0).map_err(|e| e.to_string())?,
        p: 2.0,
        j_values: vec![8, 16, 32, 64, 128, 256],
        replicates: 100,
        sde,
        rho0: GaussianSpec::new(vec![1.0], SymMatrix::identity(1)).expect("valid law"),
        picard: PicardSettings {
            n_particles: 100_000,
            max_iter: 30,
            tol: 1e-3,
        },
    };
    let report = run_chaos_rate(&cfg).map_err(|e| e.to_string())?;
    let iterations = report.reference.picard.as_ref().map_or(0, |p| p.iterations);
    Ok((
        (-1.35..=-0.65).contains(&report.fit.slope),
        format!(
            "slope {:.3} ± {:.3}; Picard converged in {iterations} iterations",
            report.fit.slope, report.fit.slope_stderr
        ),
    ))
}

fn picard_vs_closed_form() -> Outcome {
    let precision = SymMatrix::from_row_major(2, &[2.0, 0.5, 0.5, 1.0]).map_err(|e| e.to_string())?;
    let pot = Potential::quadratic(precision.clone(), vec![0.0, 0.0], 1.0).map_err(|e| e.to_string())?;
    let rho0 = GaussianSpec::new(
        vec![1.0, -1.0],
        SymMatrix::from_row_major(2, &[1.5, 0.2, 0.2, 0.7]).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let grid = uniform_grid(1e-3, 1000);
    let opts = PicardOptions::new(100_000, 10, 1e-3, 3);
    let outcome = picard_covariance_path(&pot, &rho0.sampler().map_err(|e| e.to_string())?, &grid, &opts)
        .map_err(|e| e.to_string())?;
    let exact = gaussian_meanfield_path(&precision, &[0.0, 0.0], &rho0.mean, &rho0.cov, &grid).map_err(|e| e.to_string())?;
    let distance = outcome.path.sup_cov_distance(&exact).map_err(|e| e.to_string())?;
    let allowed = opts.tol + 3.0 / (opts.n_particles as f64).sqrt();
    Ok((
        distance <= allowed && outcome.iterations <= 10,
        format!("sup distance {distance:.3e} (allowed {allowed:.3e}) after {} iterations", outcome.iterations),
    ))
}

fn gaussian_fixed_point() -> Outcome {
    let precision = SymMatrix::from_row_major(2, &[2.0, 0.5, 0.5, 1.0]).map_err(|e| e.to_string())?;
    let target = [0.3, -0.7];
    let c_star = invert_spd(&precision, 1e-12).map_err(|e| e.to_string())?;
    let path = gaussian_meanfield_path(&precision, &target, &target, &c_star, &uniform_grid(1e-3, 1000))
        .map_err(|e| e.to_string())?;
    let first = path.node(0).clone();
    let mut drift: f64 = 0.0;
    for k in 0..path.len() {
        let node = path.node(k);
        drift = drift.max(frobenius_norm(&node.cov.sub(&first.cov)));
        for (a, b) in node.mean.iter().zip(&first.mean) {
            drift = drift.max((a - b).abs());
        }
    }
    Ok((drift <= 1e-8, format!("max deviation from the initial node {drift:.3e}")))
}

fn sampling_rate() -> Outcome {
    let setup = SamplingSetup {
        potential: Potential::standard_quadratic(2),
        observable: Observable::SquaredNorm,
        time: 0.5,
        p: 2.0,
        replicates: 500,
        sde: SdeConfig::new(1e-2, 0.5, 11).map_err(|e| e.to_string())?,
        rho0: GaussianSpec::new(vec![1.0, 1.0], SymMatrix::identity(2)).map_err(|e| e.to_string())?,
    };
    let report = sampling_error_rate(&setup, &[16, 32, 64, 128, 256, 512, 1024]).map_err(|e| e.to_string())?;
    Ok((
        (-0.65..=-0.35).contains(&report.fit.slope),
        format!("slope {:.3} ± {:.3}", report.fit.slope, report.fit.slope_stderr),
    ))
}

fn excursion() -> Outcome {
    let law = ScalarLaw::AbsNormal;
    let level = law.mean() + 0.5;
    let estimates = [4, 16, 64]
        .into_iter()
        .map(|j| excursion_probability(law, level, j, 100_000, 5))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let decreasing = estimates.windows(2).all(|w| w[1].probability < w[0].probability);
    let base = &estimates[0];
    let c_hat = base.probability * base.j as f64;
    let bounded = estimates.iter().all(|e| {
        let bound = c_hat / e.j as f64;
        let se = (e.stderr.powi(2) + (base.stderr * base.j as f64 / e.j as f64).powi(2)).sqrt();
        e.probability <= bound + 2.0 * se
    });
    let listing: Vec<String> = estimates.iter().map(|e| format!("P({})={:.3e}", e.j, e.probability)).collect();
    Ok((decreasing && bounded, listing.join(", ")))
}

fn run_binary(args: &[&str], out: &Path) -> Result<Vec<u8>, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_langevin-chaos"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&status.stderr)));
    }
    Ok(status.stdout)
}

fn read(path: PathBuf) -> Result<Vec<u8>, String> {
    std::fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))
}

fn determinism() -> Outcome {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let runs: [(&str, &str, &str, &[&str]); 2] = [
        ("rate-chaos", "rate_chaos_quadratic.toml", "rate_chaos", &["--j_values=[8,16,32]", "--replicates=12", "--sde.t_final=0.2"]),
        ("excursion", "excursion.toml", "excursion", &["--replicates=50"]),
    ];
    let mut identical = true;
    let mut notes = Vec::new();
    for (command, config, stem, overrides) in runs {
        let config = configs.join(config);
        let config = config.to_str().ok_or("non-UTF-8 path")?;
        let mut outputs = Vec::new();
        for (label, threads) in [("t1", "1"), ("t4", "4")] {
            let out = dir.path().join(format!("{stem}_{label}"));
            let mut args = vec![command, "--config", config, "--threads", threads];
            args.extend_from_slice(overrides);
            run_binary(&args, &out)?;
            outputs.push(read(out.join(format!("{stem}.csv")))?);
        }
        let manifest = dir.path().join(format!("{stem}_t1")).join(format!("{stem}.manifest.json"));
        let replay = dir.path().join(format!("{stem}_replay"));
        run_binary(&[command, "--config", manifest.to_str().ok_or("non-UTF-8 path")?, "--threads", "3"], &replay)?;
        outputs.push(read(replay.join(format!("{stem}.csv")))?);
        let same = outputs.windows(2).all(|w| w[0] == w[1]);
        identical &= same;
        notes.push(format!("{command}: {}", if same { "identical" } else { "differs" }));
    }
    Ok((identical, notes.join("; ")))
}

fn main() {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let criteria: [Criterion; 10] = [
        (1, "PSD inequality suite", psd_suite),
        (2, "Wasserstein stability suite", stability_suite),
        (3, "covariance Monte-Carlo rate", covariance_rate),
        (4, "chaos rate, quadratic potential", quadratic_rate),
        (5, "chaos rate, quartic potential", quartic_rate),
        (6, "Picard path vs closed form", picard_vs_closed_form),
        (7, "Gaussian fixed point", gaussian_fixed_point),
        (8, "sampling-error rate", sampling_rate),
        (9, "excursion probabilities", excursion),
        (10, "determinism across threads and replay", determinism),
    ];
    let mut failures = 0;
    for (id, name, run) in criteria {
        if only.as_ref().is_some_and(|ids| !ids.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let (passed, detail) = run().unwrap_or_else(|e| (false, format!("error: {e}")));
        if !passed {
            failures += 1;
        }
        println!(
            "{} criterion {id} ({name}): {detail} [{:.1}s]",
            if passed { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if failures > 0 {
        std::process::exit(1);
    }
}
