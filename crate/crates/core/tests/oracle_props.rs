mod common;

use common::*;
use infoquant::prediction_oracle::{bald_mc, epig_mc, joint_eig_exact, PosteriorSamples};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn estimators_within_entropy_bounds(seed in any::<u64>(), c in 2usize..5, b in 1usize..4, s in 2usize..12) {
        let mut r = rng(seed);
        let m = categorical(&mut r, 2, c);
        let samples = PosteriorSamples::from_matrix(matrix(&mut r, s, 2 * c) * 3.0);
        let xs = points(&mut r, b, 2);
        let lc = (c as f64).ln();
        let bald = bald_mc(&samples, &m, &xs[0]).unwrap();
        prop_assert!((0.0..=lc + 1e-9).contains(&bald));
        let joint = joint_eig_exact(&samples, &m, &xs).unwrap();
        prop_assert!(joint >= 0.0 && joint <= b as f64 * lc + 1e-9);
        let single = joint_eig_exact(&samples, &m, &xs[..1]).unwrap();
        prop_assert!((single - bald).abs() < 1e-12);
        let epig = epig_mc(&samples, &m, &xs[0], &xs).unwrap();
        prop_assert!(epig >= 0.0 && epig <= lc + 1e-9);
    }
}

/// The spread of BALD estimates across seeds shrinks from 100 to 1000 samples.
#[test]
fn estimator_spread_shrinks_with_samples() {
    let mut r = rng(5);
    let m = categorical(&mut r, 2, 3);
    let post = posterior(&mut r, &m);
    let x = vector(&mut r, 2, 2.0);
    let spread = |n: usize| {
        let v: Vec<f64> = (0..30)
            .map(|seed| bald_mc(&PosteriorSamples::draw(&post, n, seed).unwrap(), &m, &x).unwrap())
            .collect();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64
    };
    let (small, large) = (spread(100), spread(1000));
    assert!(
        large < small,
        "variance at 1000 samples {large:e} not below 100 samples {small:e}"
    );
}
