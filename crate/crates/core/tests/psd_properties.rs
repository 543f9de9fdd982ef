use langevin_chaos::linalg::{invert_spd, min_eigenvalue, psd_sqrt, SymMatrix};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-3.0f64..3.0, rows * cols).prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

fn gram(m: &DMatrix<f64>) -> SymMatrix {
    SymMatrix::symmetrized(m.transpose() * m)
}

fn product(s: &SymMatrix) -> SymMatrix {
    SymMatrix::symmetrized(s.as_matrix() * s.as_matrix())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn sqrt_reconstructs(m in (1usize..=6, 1usize..=8).prop_flat_map(|(d, k)| matrix(k, d))) {
        let a = gram(&m);
        let s = psd_sqrt(&a).unwrap();
        prop_assert!(product(&s).sub(&a).frobenius_norm() <= 1e-9 * (1.0 + a.frobenius_norm()));
        prop_assert!(min_eigenvalue(&s).unwrap() >= -1e-12);
    }

    #[test]
    fn araki_yamagami((x, y) in (1usize..=5, 1usize..=6).prop_flat_map(|(d, k)| (matrix(k, d), matrix(k, d)))) {
        let lhs = psd_sqrt(&gram(&x)).unwrap().sub(&psd_sqrt(&gram(&y)).unwrap()).frobenius_norm();
        prop_assert!(lhs <= std::f64::consts::SQRT_2 * (&x - &y).norm() + 1e-9);
    }

    #[test]
    fn van_hemmen_ando(
        (x, y) in (1usize..=5).prop_flat_map(|d| (matrix(d, d), matrix(d, d))),
        eta in 1e-3f64..=1.0,
    ) {
        let d = x.ncols();
        let a = gram(&x).add(&SymMatrix::identity(d).scale(eta));
        let b = gram(&y);
        let lhs = psd_sqrt(&a).unwrap().sub(&psd_sqrt(&b).unwrap()).frobenius_norm();
        prop_assert!(lhs <= a.sub(&b).frobenius_norm() / eta + 1e-9);
    }

    #[test]
    fn sqrt_scales(m in (1usize..=6, 1usize..=8).prop_flat_map(|(d, k)| matrix(k, d)), c in 0.01f64..100.0) {
        let a = gram(&m);
        let s = psd_sqrt(&a).unwrap();
        let diff = psd_sqrt(&a.scale(c)).unwrap().sub(&s.scale(c.sqrt())).frobenius_norm();
        prop_assert!(diff <= 1e-10 * (1.0 + c.sqrt() * s.frobenius_norm()));
    }

    #[test]
    fn inverse_is_inverse(m in (1usize..=5).prop_flat_map(|d| matrix(d, d))) {
        let d = m.ncols();
        let a = gram(&m).add(&SymMatrix::identity(d));
        let inv = invert_spd(&a, 0.5).unwrap();
        let prod = SymMatrix::symmetrized(a.as_matrix() * inv.as_matrix());
        prop_assert!(prod.sub(&SymMatrix::identity(d)).frobenius_norm() <= 1e-8);
    }
}
