use langevin_chaos::dynamics::{
    gaussian_meanfield_path, picard_covariance_path, run_coupled_trajectory, run_ips, uniform_grid, PicardOptions,
    SdeConfig,
};
use langevin_chaos::harness::Accumulator;
use langevin_chaos::linalg::SymMatrix;
use langevin_chaos::measures::covariance;
use langevin_chaos::{GaussianSpec, Potential};

fn rho0() -> GaussianSpec {
    GaussianSpec::new(vec![1.0, -0.5], SymMatrix::from_rows(&[vec![1.5, 0.3], vec![0.3, 0.8]]).unwrap()).unwrap()
}

#[test]
fn particles_are_exchangeable() {
    // with J = 4, the law of particle 0 and particle 3 agree
    let pot = Potential::standard_quadratic(2);
    let law = rho0().sampler().unwrap();
    let cfg = SdeConfig::new(0.02, 0.4, 8).unwrap();
    let mut first = Accumulator::default();
    let mut last = Accumulator::default();
    for rep in 0..3000 {
        let mu = run_ips(&pot, &law, 4, &cfg, rep, cfg.n_steps()).unwrap();
        first.push(mu.point(0)[0]);
        last.push(mu.point(3)[0]);
    }
    let gap = (first.mean() - last.mean()).abs();
    let se = (first.variance() / 3000.0 + last.variance() / 3000.0).sqrt();
    assert!(gap < 4.0 * se, "{gap} vs {se}");
}

#[test]
fn ensemble_covariance_tracks_meanfield_path() {
    let pot = Potential::standard_quadratic(2);
    let spec = rho0();
    let cfg = SdeConfig::new(0.01, 0.5, 2).unwrap();
    let grid = uniform_grid(cfg.dt, cfg.n_steps());
    let path = gaussian_meanfield_path(&SymMatrix::identity(2), &[0.0, 0.0], &spec.mean, &spec.cov, &grid).unwrap();
    let law = spec.sampler().unwrap();
    let s = run_coupled_trajectory(&pot, &path, &law, 4000, &cfg, 0, &[], None).unwrap();
    let target = &path.node(cfg.n_steps()).cov;
    let err = covariance(&s.final_ips).sub(target).frobenius_norm();
    assert!(err < 0.1, "{err}");
    let err_mf = covariance(&s.final_meanfield).sub(target).frobenius_norm();
    assert!(err_mf < 0.1, "{err_mf}");
}

#[test]
fn moment_bounds_do_not_grow_with_ensemble_size() {
    let pot = Potential::even_power(2, 1.0, vec![0.0], 1.0).unwrap();
    let spec = GaussianSpec::new(vec![1.0], SymMatrix::identity(1)).unwrap();
    let law = spec.sampler().unwrap();
    let cfg = SdeConfig::new(0.01, 1.0, 3).unwrap();
    let second_moment = |j: usize| {
        let acc: Accumulator = (0..40)
            .map(|rep| {
                let mu = run_ips(&pot, &law, j, &cfg, rep, cfg.n_steps()).unwrap();
                mu.points().map(|x| x[0] * x[0]).sum::<f64>() / j as f64
            })
            .collect();
        acc.mean()
    };
    let small = second_moment(8);
    let large = second_moment(128);
    assert!(large < 2.0 * small + 0.5, "{small} vs {large}");
}

#[test]
fn picard_matches_closed_form_for_quadratic() {
    let prec = SymMatrix::from_diagonal(&[1.0, 2.0]);
    let pot = Potential::quadratic(prec.clone(), vec![0.0, 0.0], 1.0).unwrap();
    let spec = rho0();
    let grid = uniform_grid(0.01, 50);
    let exact = gaussian_meanfield_path(&prec, &[0.0, 0.0], &spec.mean, &spec.cov, &grid).unwrap();
    let opts = PicardOptions::new(20_000, 10, 1e-3, 5);
    let out = picard_covariance_path(&pot, &spec.sampler().unwrap(), &grid, &opts).unwrap();
    assert!(out.converged);
    let gap = out.path.sup_cov_distance(&exact).unwrap();
    assert!(gap < 1e-3 + 3.0 / (20_000f64).sqrt(), "{gap}");
}

#[test]
fn stationary_gaussian_stays_put() {
    let prec = SymMatrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
    let center = [0.3, -0.2];
    let cov = langevin_chaos::linalg::invert_spd(&prec, 1e-8).unwrap();
    let path = gaussian_meanfield_path(&prec, &center, &center, &cov, &uniform_grid(0.01, 100)).unwrap();
    for k in 0..path.len() {
        let node = path.node(k);
        assert!(node.cov.sub(&cov).frobenius_norm() < 1e-8);
        assert!(node.mean.iter().zip(&center).all(|(a, b)| (a - b).abs() < 1e-8));
    }
}
