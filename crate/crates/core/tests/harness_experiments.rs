use langevin_chaos::dynamics::SdeConfig;
use langevin_chaos::harness::{
    calibrate_radius, estimate_chaos_error, excursion_decay_experiment, meanfield_reference, run_chaos_rate, PicardSettings,
    RateExperimentConfig,
};
use langevin_chaos::linalg::SymMatrix;
use langevin_chaos::{Error, GaussianSpec, Potential};

fn quadratic_cfg(j_values: Vec<usize>, replicates: usize) -> RateExperimentConfig {
    RateExperimentConfig {
        potential: Potential::standard_quadratic(1),
        p: 2.0,
        j_values,
        replicates,
        sde: SdeConfig::new(0.01, 1.0, 17).unwrap(),
        rho0: GaussianSpec::new(vec![1.0], SymMatrix::identity(1)).unwrap(),
        picard: PicardSettings::default(),
    }
}

#[test]
fn chaos_error_decreases_in_ensemble_size() {
    let cfg = quadratic_cfg(vec![16, 64, 256], 40);
    let report = run_chaos_rate(&cfg).unwrap();
    let e: Vec<f64> = report.estimates.iter().map(|e| e.estimate).collect();
    assert!(e[0] > e[1] && e[1] > e[2], "{e:?}");
    assert!(report.fit.slope < -0.6 && report.fit.slope > -1.4, "{:?}", report.fit);
}

#[test]
fn chaos_error_is_deterministic() {
    let cfg = quadratic_cfg(vec![8, 16, 32], 10);
    let r = meanfield_reference(&cfg).unwrap();
    let a = estimate_chaos_error(&cfg, &r.path, 8).unwrap();
    let b = estimate_chaos_error(&cfg, &r.path, 8).unwrap();
    assert_eq!(a, b);
}

#[test]
fn config_validation() {
    let mut cfg = quadratic_cfg(vec![16, 8, 32], 4);
    assert!(cfg.validate().is_err());
    cfg.j_values = vec![8, 16];
    assert!(cfg.validate().is_err());
    cfg.j_values = vec![8, 16, 32];
    cfg.p = 1.5;
    assert!(cfg.validate().is_err());
    cfg.p = 2.0;
    cfg.rho0 = GaussianSpec::new(vec![0.0], SymMatrix::zeros(1)).unwrap();
    assert!(cfg.validate().is_err());
    cfg.rho0 = GaussianSpec::standard(1);
    assert!(cfg.validate().is_ok());
    assert!(matches!(
        estimate_chaos_error(&cfg, &meanfield_reference(&cfg).unwrap().path, 1),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn excursion_frequencies() {
    let cfg = quadratic_cfg(vec![4, 16, 64], 60);
    let r = meanfield_reference(&cfg).unwrap();
    let far = excursion_decay_experiment(&cfg, &r.path, 2.0, 1e6).unwrap();
    assert!(far.iter().all(|f| f.ips == 0.0 && f.meanfield == 0.0));

    let radius = calibrate_radius(&cfg, &r.path, 2.0, 20_000, 1.0).unwrap();
    let near = excursion_decay_experiment(&cfg, &r.path, 2.0, radius).unwrap();
    assert!(near[0].meanfield > 0.0, "{near:?}");
    for w in near.windows(2) {
        let tol = 2.0 * (w[0].ips_stderr.powi(2) + w[1].ips_stderr.powi(2)).sqrt();
        assert!(w[1].ips <= w[0].ips + tol, "{near:?}");
    }
}
