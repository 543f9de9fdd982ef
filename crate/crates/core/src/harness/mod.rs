//! Monte-Carlo experiments and property suites built on the dynamics.

mod chaos;
mod covariance;
mod excursion;
mod output;
mod rate;
mod sampling;
mod stats;
mod suites;

pub use chaos::{
    calibrate_radius, dt_halving_check, estimate_chaos_error, estimate_chaos_error_observed, excursion_decay_experiment,
    meanfield_reference, run_chaos_rate, ChaosEstimate, ChaosRateReport, DtHalvingCheck, ExcursionFrequency,
    MeanFieldReference, PicardSettings, RateExperimentConfig,
};
pub use covariance::{covariance_mc_rate, CovarianceRateReport};
pub use excursion::{excursion_probability, ExcursionEstimate, ScalarLaw, MIN_EXCURSION_TRIALS};
pub use output::{format_csv, ExperimentRow, TrajectoryDump, CSV_HEADER};
pub use rate::{fit_log_rate, RateFit, RatePoint};
pub use sampling::{sampling_error, sampling_error_rate, Observable, SamplingErrorEstimate, SamplingRateReport, SamplingSetup};
pub use stats::Accumulator;
pub use suites::{
    class_check_suite, convexity_suite, psd_property_suite, stability_property_suite, Instance, SuiteKind, SuiteReport,
    Violation, SUITE_TOLERANCE,
};
