//! Gaussian (Laplace) approximation of the weight posterior around the MAP.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::glm::{map_gradient, Dataset, GlmModel};
use crate::psd::{PsdFactor, PsdMatrix};

/// Gradient norm above which `build_posterior` warns that the mode is not a MAP.
pub const MAP_GRADIENT_WARNING: f64 = 1e-3;

/// `N(w*, H''[w*|D]⁻¹)` with `H''[w*|D] = Σᵢ H''[yᵢ|xᵢ,w*] + λ Id`.
///
/// The stored precision never contains jitter; jitter only enters at
/// factorization time, so `λ = 0` is representable.
#[derive(Clone, Debug)]
pub struct GaussianPosterior {
    mode: DVector<f64>,
    precision: PsdMatrix,
    prior_precision: f64,
}

impl GaussianPosterior {
    pub fn new(mode: DVector<f64>, precision: PsdMatrix, prior_precision: f64) -> Result<Self> {
        if mode.len() != precision.dim() {
            return Err(Error::DimensionMismatch {
                expected: precision.dim(),
                found: mode.len(),
            });
        }
        if !(prior_precision >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "prior precision must be non-negative, got {prior_precision}"
            )));
        }
        Ok(Self {
            mode,
            precision,
            prior_precision,
        })
    }

    /// Mode `w*` and precision `Σᵢ H''(xᵢ, yᵢ) + λ Id` over the labeled `train` set.
    pub fn build(model: &GlmModel, train: &Dataset, prior_precision: f64) -> Result<Self> {
        if train.dim() != model.dim() && !train.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                found: train.dim(),
            });
        }
        let k = model.num_params();
        let mut precision = PsdMatrix::scaled_identity(k, prior_precision);
        if !train.is_empty() {
            for (x, y) in train.labeled_rows()? {
                precision.add_assign(&model.observed_information(&x, y)?)?;
            }
            let grad = map_gradient(model, train, prior_precision)?.amax();
            if grad > MAP_GRADIENT_WARNING {
                log::warn!("posterior mode is not a MAP estimate of the training data (gradient norm {grad:e})");
            }
        }
        Self::new(model.flat_weights(), precision, prior_precision)
    }

    pub fn mode(&self) -> &DVector<f64> {
        &self.mode
    }

    pub fn precision(&self) -> &PsdMatrix {
        &self.precision
    }

    pub fn prior_precision(&self) -> f64 {
        self.prior_precision
    }

    pub fn dim(&self) -> usize {
        self.mode.len()
    }

    pub fn factor(&self) -> Result<PsdFactor> {
        self.precision.factor()
    }

    /// Differential entropy `-½ log det H'' + (k/2) log 2πe`.
    pub fn entropy_approx(&self) -> Result<f64> {
        let logdet = self.factor()?.logdet();
        Ok(-0.5 * logdet + gaussian_entropy_constant(self.dim()))
    }

    /// `n` draws from `N(mode, precision⁻¹)` as the rows of an `n × k` matrix.
    ///
    /// With `precision = L Lᵀ`, each draw is `mode + L⁻ᵀ z` for standard normal `z`.
    pub fn sample_weights(&self, n: usize, seed: u64) -> Result<DMatrix<f64>> {
        if n == 0 {
            return Err(Error::EmptySampleSet);
        }
        let factor = self.factor()?;
        let k = self.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = DMatrix::from_fn(k, n, |_, _| StandardNormal.sample(&mut rng));
        let mut draws = factor.solve_lower_transpose(&z)?;
        for mut col in draws.column_iter_mut() {
            col += &self.mode;
        }
        Ok(draws.transpose())
    }
}

/// `C_k = (k/2) log 2πe`.
pub fn gaussian_entropy_constant(k: usize) -> f64 {
    0.5 * k as f64 * (2.0 * PI * std::f64::consts::E).ln()
}
