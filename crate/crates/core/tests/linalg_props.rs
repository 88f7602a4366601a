mod common;

use common::*;
use infoquant::psd::{chol_logdet, kron, solve_psd, PsdMatrix};
use nalgebra::DMatrix;
use proptest::prelude::*;

proptest! {
    #[test]
    fn logdet_plus_identity_bounded_by_trace(seed in any::<u64>(), n in 1usize..8, rank in 0usize..8) {
        let mut r = rng(seed);
        let a = psd(&mut r, n, rank);
        let lhs = chol_logdet(&a.add_identity(1.0)).unwrap();
        prop_assert!(lhs <= a.trace() + 1e-9);
        if rank > 0 {
            prop_assert!(lhs < a.trace());
        }
    }

    #[test]
    fn solve_recovers_rhs(seed in any::<u64>(), n in 1usize..10, m in 1usize..4) {
        let mut r = rng(seed);
        let a = spd(&mut r, n);
        let x = matrix(&mut r, n, m);
        let b = a.matrix() * &x;
        let got = solve_psd(&a, &b).unwrap();
        prop_assert!((&got - &x).norm() <= 1e-7 * x.norm().max(1e-300));
    }

    #[test]
    fn kron_mixed_product(seed in any::<u64>(), p in 1usize..4, q in 1usize..4, s in 1usize..4, t in 1usize..4, u in 1usize..4, v in 1usize..4) {
        let mut r = rng(seed);
        let a = matrix(&mut r, p, q);
        let b = matrix(&mut r, s, t);
        let c = matrix(&mut r, q, u);
        let d = matrix(&mut r, t, v);
        let lhs = kron(&a, &b) * kron(&c, &d);
        let rhs = kron(&(&a * &c), &(&b * &d));
        prop_assert!((&lhs - &rhs).norm() <= 1e-10 * rhs.norm().max(1.0));
    }
}

#[test]
fn zero_matrix_attains_the_trace_bound() {
    let a = PsdMatrix::zeros(4);
    assert_eq!(chol_logdet(&a.add_identity(1.0)).unwrap(), a.trace());
    assert_eq!(
        kron(&DMatrix::identity(1, 1), &DMatrix::identity(2, 2)),
        DMatrix::identity(2, 2)
    );
}
