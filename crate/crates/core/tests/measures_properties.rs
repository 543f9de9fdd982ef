use langevin_chaos::measures::{
    covariance, wasserstein_1d, wasserstein_assignment, wasserstein_identity_bound, wasserstein_to_dirac,
};
use langevin_chaos::EmpiricalMeasure;
use proptest::prelude::*;

fn measure(dim: usize, j: usize) -> impl Strategy<Value = EmpiricalMeasure> {
    prop::collection::vec(-5.0f64..5.0, dim * j).prop_map(move |v| EmpiricalMeasure::new(dim, v).unwrap())
}

fn pair() -> impl Strategy<Value = (EmpiricalMeasure, EmpiricalMeasure)> {
    (1usize..=3, 1usize..=8).prop_flat_map(|(d, j)| (measure(d, j), measure(d, j)))
}

fn triple() -> impl Strategy<Value = (EmpiricalMeasure, EmpiricalMeasure, EmpiricalMeasure)> {
    (1usize..=3, 1usize..=8).prop_flat_map(|(d, j)| (measure(d, j), measure(d, j), measure(d, j)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn triangle_inequality((mu, nu, ka) in triple(), p in 1.0f64..4.0) {
        let direct = wasserstein_assignment(&mu, &ka, p).unwrap();
        let via = wasserstein_assignment(&mu, &nu, p).unwrap() + wasserstein_assignment(&nu, &ka, p).unwrap();
        prop_assert!(direct <= via + 1e-9);
    }

    #[test]
    fn symmetric_and_below_identity_coupling((mu, nu) in pair(), p in 1.0f64..4.0) {
        let a = wasserstein_assignment(&mu, &nu, p).unwrap();
        let b = wasserstein_assignment(&nu, &mu, p).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a));
        prop_assert!(a <= wasserstein_identity_bound(&mu, &nu, p).unwrap() + 1e-12);
    }

    #[test]
    fn covariance_stability((mu, nu) in pair()) {
        let w2 = wasserstein_assignment(&mu, &nu, 2.0).unwrap();
        let lhs = covariance(&mu).sub(&covariance(&nu)).frobenius_norm();
        let rhs = 2.0 * (wasserstein_to_dirac(&mu, 2.0).unwrap() + wasserstein_to_dirac(&nu, 2.0).unwrap()) * w2;
        prop_assert!(lhs <= rhs + 1e-9);
    }

    #[test]
    fn sqrt_covariance_lipschitz((mu, nu) in pair()) {
        let w2 = wasserstein_assignment(&mu, &nu, 2.0).unwrap();
        let sm = langevin_chaos::linalg::psd_sqrt(&covariance(&mu)).unwrap();
        let sn = langevin_chaos::linalg::psd_sqrt(&covariance(&nu)).unwrap();
        prop_assert!(sm.sub(&sn).frobenius_norm() <= std::f64::consts::SQRT_2 * w2 + 1e-9);
    }

    #[test]
    fn covariance_norm_below_second_moment(mu in (1usize..=3, 1usize..=8).prop_flat_map(|(d, j)| measure(d, j))) {
        let m2 = wasserstein_to_dirac(&mu, 2.0).unwrap().powi(2);
        prop_assert!(covariance(&mu).frobenius_norm() <= m2 + 1e-9);
    }

    #[test]
    fn sorted_pairing_matches_assignment(
        (mu, nu) in (1usize..=8).prop_flat_map(|j| (measure(1, j), measure(1, j))),
        p in 1.0f64..4.0,
    ) {
        let a = wasserstein_assignment(&mu, &nu, p).unwrap();
        let s = wasserstein_1d(&mu, &nu, p).unwrap();
        prop_assert!((a - s).abs() <= 1e-10);
    }

    #[test]
    fn translation_leaves_covariance_fixed(mu in measure(2, 6), a in prop::collection::vec(-3.0f64..3.0, 2)) {
        let nu = mu.translated(&a);
        prop_assert!(covariance(&mu).sub(&covariance(&nu)).frobenius_norm() <= 1e-9);
    }
}
