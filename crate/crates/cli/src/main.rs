//! `langevin-chaos`: runs the propagation-of-chaos experiments and property
//! suites from flat TOML configs.
//!
//! Exit codes: 0 success, 1 property violation, 2 configuration or I/O
//! error, 3 statistical failure (too many failed replicates, no fixed-point
//! convergence, covariance collapse, non-positive estimates in a fit).

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use langevin_chaos::harness::SuiteKind;

const FLAGS: &[&str] = &["config", "seed", "threads", "out-dir", "dump-trajectories", "help", "version"];

#[derive(Debug, Parser)]
#[command(name = "langevin-chaos", version, about = "Ensemble Langevin propagation-of-chaos experiments")]
#[command(after_help = "Config keys can be overridden with --key=value, e.g. --sde.dt=0.002 --j_values=[8,16,32]")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (TOML), or a run manifest (JSON) to replay.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; replaces the config's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Write per-particle trajectories of the first `dump.max_replicates` replicates.
    #[arg(long, global = true)]
    dump_trajectories: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Chaos error E[sup_t |X − X̄|^p] across ensemble sizes, with a log-log fit.
    RateChaos,
    /// Monte-Carlo rate of the empirical covariance of i.i.d. samples.
    CovRate,
    /// Excursion probabilities: stopping-time frequencies or i.i.d. sample means.
    Excursion,
    /// L^p error of ensemble averages against the mean-field expectation.
    SamplingError,
    /// Randomized property suite; exit 1 on any violation.
    Suite {
        #[arg(value_enum)]
        which: SuiteArg,
    },
    /// Mean-field covariance path by fixed-point iteration.
    PicardPath,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SuiteArg {
    Stability,
    Psd,
    Convexity,
    ClassCheck,
}

impl From<SuiteArg> for SuiteKind {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::Stability => SuiteKind::Stability,
            SuiteArg::Psd => SuiteKind::Psd,
            SuiteArg::Convexity => SuiteKind::Convexity,
            SuiteArg::ClassCheck => SuiteKind::ClassCheck,
        }
    }
}

/// Splits `--key=value` config overrides from the clap-visible arguments.
fn split_overrides(args: impl Iterator<Item = String>) -> (Vec<String>, Vec<(String, String)>) {
    let mut keep = Vec::new();
    let mut overrides = Vec::new();
    for arg in args {
        if let Some((key, value)) = arg.strip_prefix("--").and_then(|rest| rest.split_once('=')) {
            if !FLAGS.contains(&key) {
                overrides.push((key.to_string(), value.to_string()));
                continue;
            }
        }
        keep.push(arg);
    }
    (keep, overrides)
}

fn main() -> ExitCode {
    let (args, overrides) = split_overrides(std::env::args());
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let ctx = commands::Context {
        config: cli.config,
        seed: cli.seed,
        overrides,
        out_dir: cli.out_dir,
        dump_trajectories: cli.dump_trajectories,
    };
    let result = match cli.command {
        Command::RateChaos => commands::rate_chaos(&ctx),
        Command::CovRate => commands::cov_rate(&ctx),
        Command::Excursion => commands::excursion(&ctx),
        Command::SamplingError => commands::sampling_error(&ctx),
        Command::Suite { which } => commands::suite(&ctx, which.into()),
        Command::PicardPath => commands::picard_path(&ctx),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
