#![allow(dead_code)]

use infoquant::glm::{GlmModel, Head};
use infoquant::posterior::GaussianPosterior;
use infoquant::psd::PsdMatrix;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

pub fn vector(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-scale..scale))
}

pub fn points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<DVector<f64>> {
    (0..n).map(|_| vector(rng, d, 2.0)).collect()
}

/// PSD of the given rank (`G Gᵀ` with `G` of width `rank`).
pub fn psd(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> PsdMatrix {
    PsdMatrix::from_outer(&matrix(rng, n, rank))
}

pub fn spd(rng: &mut ChaCha8Rng, n: usize) -> PsdMatrix {
    psd(rng, n, n).add_identity(0.5)
}

pub fn categorical(rng: &mut ChaCha8Rng, d: usize, c: usize) -> GlmModel {
    GlmModel::new(Head::categorical(c).unwrap(), matrix(rng, d, c)).unwrap()
}

/// Posterior at the model's weights with a random SPD precision.
pub fn posterior(rng: &mut ChaCha8Rng, model: &GlmModel) -> GaussianPosterior {
    let k = model.num_params();
    let g = matrix(rng, k, k) * 0.5;
    GaussianPosterior::new(model.flat_weights(), PsdMatrix::from_outer(&g).add_identity(1.0), 1.0).unwrap()
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}
