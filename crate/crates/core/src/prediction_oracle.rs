//! Prediction-space Monte-Carlo estimators over posterior weight samples.
//!
//! All configurations of the labels are enumerated exactly; only the weight
//! posterior is sampled. Entropies are in nats.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::glm::{softmax, GlmModel, HeadKind};
use crate::posterior::GaussianPosterior;

/// Upper bound on `C^B` for [`joint_eig_exact`].
pub const MAX_CONFIGURATIONS: u128 = 100_000;

/// Minimum number of weight samples for the entropy estimators.
pub const MIN_SAMPLES: usize = 2;

/// Weight draws as the rows of an `n_samples × k` matrix.
#[derive(Clone, Debug)]
pub struct PosteriorSamples {
    weights: DMatrix<f64>,
    seed: Option<u64>,
}

impl PosteriorSamples {
    pub fn draw(posterior: &GaussianPosterior, n: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            weights: posterior.sample_weights(n, seed)?,
            seed: Some(seed),
        })
    }

    pub fn from_matrix(weights: DMatrix<f64>) -> Self {
        Self { weights, seed: None }
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.nrows() == 0
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    fn check(&self, model: &GlmModel) -> Result<()> {
        if model.head().kind() != HeadKind::Categorical {
            return Err(Error::UnsupportedHead);
        }
        if self.len() < MIN_SAMPLES {
            return Err(Error::TooFewSamples {
                required: MIN_SAMPLES,
                got: self.len(),
            });
        }
        if self.weights.ncols() != model.num_params() {
            return Err(Error::DimensionMismatch {
                expected: model.num_params(),
                found: self.weights.ncols(),
            });
        }
        Ok(())
    }

    /// `S × C` table of `p(y|x, w_s)`.
    pub fn probability_table(&self, model: &GlmModel, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let d = model.dim();
        if x.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: x.len(),
            });
        }
        let c = model.classes();
        let mut table = DMatrix::zeros(self.len(), c);
        for s in 0..self.len() {
            let w = self.weights.row(s);
            let z = DVector::from_fn(c, |cls, _| (0..d).map(|i| w[cls * d + i] * x[i]).sum::<f64>());
            table.set_row(s, &softmax(&z).transpose());
        }
        Ok(table)
    }
}

fn entropy<'a>(p: impl IntoIterator<Item = &'a f64>) -> f64 {
    -p.into_iter().filter(|v| **v > 0.0).map(|v| v * v.ln()).sum::<f64>()
}

/// BALD from a probability table: `H[mean_s π_s] − mean_s H[π_s]`, at least 0.
fn bald_from_table(table: &DMatrix<f64>) -> f64 {
    let s = table.nrows() as f64;
    let mean = table.row_mean();
    let conditional: f64 = table.row_iter().map(|r| entropy(r.iter())).sum::<f64>() / s;
    (entropy(mean.iter()) - conditional).max(0.0)
}

pub fn bald_mc(samples: &PosteriorSamples, model: &GlmModel, x: &DVector<f64>) -> Result<f64> {
    samples.check(model)?;
    Ok(bald_from_table(&samples.probability_table(model, x)?))
}

/// [`bald_mc`] over a pool, in pool order.
pub fn bald_pool(samples: &PosteriorSamples, model: &GlmModel, pool: &[DVector<f64>]) -> Result<Vec<f64>> {
    samples.check(model)?;
    pool.par_iter()
        .map(|x| Ok(bald_from_table(&samples.probability_table(model, x)?)))
        .collect()
}

/// `I(Y₁, …, Y_B; Ω)` by enumerating all `C^B` label configurations.
pub fn joint_eig_exact(samples: &PosteriorSamples, model: &GlmModel, batch: &[DVector<f64>]) -> Result<f64> {
    samples.check(model)?;
    let c = model.classes();
    let count = (c as u128).checked_pow(batch.len() as u32).unwrap_or(u128::MAX);
    if count > MAX_CONFIGURATIONS {
        return Err(Error::TooManyConfigurations {
            count,
            limit: MAX_CONFIGURATIONS,
        });
    }
    let tables: Vec<DMatrix<f64>> = batch
        .iter()
        .map(|x| samples.probability_table(model, x))
        .collect::<Result<_>>()?;
    let s = samples.len();
    // per-sample joints factorize, so their entropy is a sum
    let conditional: f64 = (0..s)
        .map(|i| tables.iter().map(|t| entropy(t.row(i).iter())).sum::<f64>())
        .sum::<f64>()
        / s as f64;

    let mut config = vec![0usize; batch.len()];
    let mut joint_entropy = 0.0;
    for _ in 0..count {
        let mut p = 0.0;
        for i in 0..s {
            p += tables.iter().zip(&config).map(|(t, &y)| t[(i, y)]).product::<f64>();
        }
        p /= s as f64;
        if p > 0.0 {
            joint_entropy -= p * p.ln();
        }
        for digit in config.iter_mut().rev() {
            *digit += 1;
            if *digit < c {
                break;
            }
            *digit = 0;
        }
    }
    Ok((joint_entropy - conditional).max(0.0))
}

/// `I(Y^eval; Y^acq)` from the two probability tables of one pair.
fn pair_information(acq: &DMatrix<f64>, eval: &DMatrix<f64>) -> f64 {
    let s = acq.nrows() as f64;
    let joint = acq.tr_mul(eval) / s;
    let pa = joint.column_sum();
    let pe = joint.row_sum();
    (entropy(pa.iter()) + entropy(pe.iter()) - entropy(joint.iter())).max(0.0)
}

/// EPIG: mean over eval points of `I(Y^eval; Y^acq | x^eval, x^acq)`.
pub fn epig_mc(
    samples: &PosteriorSamples,
    model: &GlmModel,
    x_acq: &DVector<f64>,
    eval: &[DVector<f64>],
) -> Result<f64> {
    samples.check(model)?;
    if eval.is_empty() {
        return Err(Error::EmptyEvalSet);
    }
    let acq = samples.probability_table(model, x_acq)?;
    let mut total = 0.0;
    for x in eval {
        total += pair_information(&acq, &samples.probability_table(model, x)?);
    }
    Ok(total / eval.len() as f64)
}

/// [`epig_mc`] over a pool, sharing the eval tables.
pub fn epig_pool(
    samples: &PosteriorSamples,
    model: &GlmModel,
    pool: &[DVector<f64>],
    eval: &[DVector<f64>],
) -> Result<Vec<f64>> {
    samples.check(model)?;
    if eval.is_empty() {
        return Err(Error::EmptyEvalSet);
    }
    let eval_tables: Vec<DMatrix<f64>> = eval
        .par_iter()
        .map(|x| samples.probability_table(model, x))
        .collect::<Result<_>>()?;
    pool.par_iter()
        .map(|x| {
            let acq = samples.probability_table(model, x)?;
            let total: f64 = eval_tables.iter().map(|e| pair_information(&acq, e)).sum();
            Ok(total / eval_tables.len() as f64)
        })
        .collect()
}

/// Ranks starting at 1, ties receive the mean of their positions.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation: Pearson correlation of average ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 3 {
        return Err(Error::TooFewSamples {
            required: 3,
            got: a.len(),
        });
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite score".into()));
    }
    let ra = DVector::from_vec(average_ranks(a));
    let rb = DVector::from_vec(average_ranks(b));
    let ca = ra.add_scalar(-ra.mean());
    let cb = rb.add_scalar(-rb.mean());
    let (saa, sbb) = (ca.norm_squared(), cb.norm_squared());
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::DegenerateConstantInput);
    }
    Ok((ca.dot(&cb) / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}
