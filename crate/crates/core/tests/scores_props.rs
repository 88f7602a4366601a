mod common;

use common::*;
use infoquant::glm::{Dataset, GlmModel, Head, Label};
use infoquant::info_scores::{Approx, IncrementalObjective, Scorer, SetObjective};
use infoquant::posterior::GaussianPosterior;
use infoquant::psd::PsdMatrix;
use infoquant::similarity::{build_data_matrix, eig_via_similarity, one_sample_fisher, LabelMode};
use nalgebra::DVector;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eig_bound_chain_and_trace_additivity(seed in any::<u64>(), n in 0usize..5) {
        let mut r = rng(seed);
        let m = categorical(&mut r, 3, 3);
        let p = posterior(&mut r, &m);
        let s = Scorer::new(&m, &p).unwrap();
        let xs = points(&mut r, n, 3);
        let pair = s.eig_score(&xs).unwrap();
        prop_assert!(pair.logdet >= -1e-9);
        prop_assert!(pair.logdet <= pair.trace + 1e-9);
        let singles: f64 = xs.iter().map(|x| s.eig_score(std::slice::from_ref(x)).unwrap().trace).sum();
        prop_assert!((pair.trace - singles).abs() <= 1e-10 * singles.max(1.0));
    }

    #[test]
    fn duplicated_candidate_is_subadditive(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = categorical(&mut r, 2, 3);
        let p = posterior(&mut r, &m);
        let s = Scorer::new(&m, &p).unwrap();
        let x = vector(&mut r, 2, 2.0);
        let one = s.eig_score(std::slice::from_ref(&x)).unwrap().logdet;
        let two = s.eig_score(&[x.clone(), x]).unwrap().logdet;
        prop_assert!(two < 2.0 * one);
    }

    #[test]
    fn label_independence(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = categorical(&mut r, 2, 3);
        let p = posterior(&mut r, &m);
        let s = Scorer::new(&m, &p).unwrap();
        let xs = points(&mut r, 3, 2);
        let ev = points(&mut r, 4, 2);
        let lab = |v: &[DVector<f64>], off: usize| -> Vec<(DVector<f64>, Label)> {
            v.iter().enumerate().map(|(i, x)| (x.clone(), Label::Class((i + off) % 3))).collect()
        };
        let (a, b) = (s.eig_score(&xs).unwrap(), s.ig_score(&lab(&xs, seed as usize)).unwrap());
        prop_assert!((a.logdet - b.logdet).abs() <= 1e-12 && (a.trace - b.trace).abs() <= 1e-12);
        let (a, b) = (s.epig_score(&xs, &ev).unwrap(), s.pig_score(&lab(&xs, 1), &lab(&ev, 2)).unwrap());
        prop_assert!((a.logdet - b.logdet).abs() <= 1e-12 && (a.trace - b.trace).abs() <= 1e-12);
    }

    #[test]
    fn jepig_trace_is_m_times_epig(seed in any::<u64>(), m_eval in 2usize..6) {
        let mut r = rng(seed);
        let m = categorical(&mut r, 2, 3);
        let p = posterior(&mut r, &m);
        let s = Scorer::new(&m, &p).unwrap();
        let xs = points(&mut r, 2, 2);
        let ev = points(&mut r, m_eval, 2);
        let j = s.jepig_score(&xs, &ev).unwrap();
        let e = s.epig_score(&xs, &ev).unwrap();
        prop_assert!((j.trace - m_eval as f64 * e.trace).abs() <= 1e-10 * j.trace.abs().max(1.0));
        prop_assert!(j.logdet != e.logdet);
    }

    #[test]
    fn egl_is_fisher_trace(seed in any::<u64>(), d in 1usize..5, c in 2usize..5) {
        let mut r = rng(seed);
        let m = categorical(&mut r, d, c);
        let p = GaussianPosterior::new(m.flat_weights(), PsdMatrix::identity(d * c), 1.0).unwrap();
        let s = Scorer::new(&m, &p).unwrap();
        let x = vector(&mut r, d, 2.0);
        prop_assert!((s.egl_score(&x).unwrap() - m.fisher_information(&x).unwrap().trace()).abs() < 1e-10);
    }

    #[test]
    fn similarity_duality(seed in any::<u64>(), n in 1usize..8) {
        let mut r = rng(seed);
        let m = categorical(&mut r, 2, 3);
        let p = posterior(&mut r, &m);
        let s = Scorer::new(&m, &p).unwrap();
        let data = Dataset::from_rows(&points(&mut r, n, 2), None, 2).unwrap();
        let g = build_data_matrix(&m, &data, LabelMode::Sampled { seed }).unwrap();
        let sim = eig_via_similarity(&g, p.precision()).unwrap();
        let weights = 0.5 * (one_sample_fisher(&g).add(p.precision()).unwrap().factor().unwrap().logdet()
            - s.precision_factor().logdet());
        prop_assert!((sim - weights).abs() < 1e-9);
    }
}

/// Every `z` gains no more after `B ⊇ A` was added (pool of 6, all nested pairs).
#[test]
fn eig_logdet_is_submodular_on_small_pools() {
    for seed in 0..5 {
        let mut r = rng(100 + seed);
        let m = categorical(&mut r, 2, 3);
        let p = posterior(&mut r, &m);
        let s = Scorer::new(&m, &p).unwrap();
        let pool = points(&mut r, 6, 2);
        let value = |mask: u32| {
            let xs: Vec<_> = (0..6)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| pool[i].clone())
                .collect();
            s.eig_score(&xs).unwrap().logdet
        };
        let values: Vec<f64> = (0..64).map(value).collect();
        for b in 0u32..64 {
            for a in 0u32..64 {
                if a & !b != 0 {
                    continue;
                }
                for z in 0..6 {
                    let bit = 1 << z;
                    if b & bit != 0 {
                        continue;
                    }
                    let ga = values[(a | bit) as usize] - values[a as usize];
                    let gb = values[(b | bit) as usize] - values[b as usize];
                    assert!(ga >= gb - 1e-9, "A={a:b} B={b:b} z={z}: {ga} < {gb}");
                }
            }
        }
    }
}

#[test]
fn hard_labels_bias_gaussian_scores_to_zero() {
    let mut r = rng(7);
    let m = GlmModel::new(Head::gaussian(), matrix(&mut r, 3, 1)).unwrap();
    let p = GaussianPosterior::new(m.flat_weights(), PsdMatrix::identity(3), 1.0).unwrap();
    let data = Dataset::from_rows(&points(&mut r, 4, 3), None, 3).unwrap();
    let hard = build_data_matrix(&m, &data, LabelMode::Hard).unwrap();
    assert_eq!(eig_via_similarity(&hard, p.precision()).unwrap(), 0.0);
    let mean: f64 = (0..50)
        .map(|seed| {
            let g = build_data_matrix(&m, &data, LabelMode::Sampled { seed }).unwrap();
            eig_via_similarity(&g, p.precision()).unwrap()
        })
        .sum::<f64>()
        / 50.0;
    assert!(mean > 0.1, "sampled-label mean score {mean}");
}

#[test]
fn greedy_state_tracks_direct_values() {
    let mut r = rng(8);
    let m = categorical(&mut r, 3, 3);
    let p = posterior(&mut r, &m);
    let s = Scorer::new(&m, &p).unwrap();
    let pool = points(&mut r, 6, 3);
    let eval = s.eval_fisher(&points(&mut r, 5, 3), false).unwrap();
    let obj = SetObjective::Transductive(Approx::LogDet, eval);
    let mut st = IncrementalObjective::new(&s, obj.clone()).unwrap();
    for i in 0..6 {
        st.commit(&m.fisher_factor(&pool[i]).unwrap()).unwrap();
        let direct = obj.value(&s, &pool[..=i]).unwrap();
        assert!((st.value() - direct).abs() < 1e-9);
    }
}
