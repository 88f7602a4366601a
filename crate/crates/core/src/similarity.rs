//! Similarity-matrix view of the weight-space scores.
//!
//! A data matrix `G` stacks one score Jacobian per row. Its Gram matrices
//! `S = G Gᵀ` (Euclidean) and `S_P = G P⁻¹ Gᵀ` (precision-weighted) live in
//! sample space, and the matrix-determinant lemma moves log-determinants
//! between the `n × n` and `k × k` sides:
//! `log det(S_P + Id) = log det(Gᵀ G + P) − log det P`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::glm::{argmax, Dataset, GlmModel, HeadKind, Label};
use crate::psd::PsdMatrix;

/// Relative pivot floor below which a Gram matrix counts as singular.
pub const SINGULAR_GRAM_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabelMode {
    /// `argmax_y p(y|x,w*)`, lowest class on ties; biased.
    Hard,
    /// One draw `y ~ p(y|x,w*)` per row.
    Sampled { seed: u64 },
    /// Labels from the dataset.
    Given,
}

/// Rows are score Jacobians `H'[yᵢ|xᵢ,w*]`.
#[derive(Clone, Debug, PartialEq)]
pub struct JacobianDataMatrix {
    rows: DMatrix<f64>,
    label_mode: LabelMode,
}

impl JacobianDataMatrix {
    pub fn from_matrix(rows: DMatrix<f64>, label_mode: LabelMode) -> Self {
        Self { rows, label_mode }
    }

    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    /// Number of parameters `k`.
    pub fn width(&self) -> usize {
        self.rows.ncols()
    }

    pub fn label_mode(&self) -> LabelMode {
        self.label_mode
    }

    /// Whether `GᵀG` is a biased Fisher estimate (labels not sampled).
    pub fn is_biased(&self) -> bool {
        !matches!(self.label_mode, LabelMode::Sampled { .. })
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn stack(&self, other: &JacobianDataMatrix) -> Result<JacobianDataMatrix> {
        check_width(self, other)?;
        let (a, b) = (self.len(), other.len());
        let rows = DMatrix::from_fn(a + b, self.width(), |i, j| {
            if i < a {
                self.rows[(i, j)]
            } else {
                other.rows[(i - a, j)]
            }
        });
        let label_mode = if self.label_mode == other.label_mode {
            self.label_mode
        } else {
            LabelMode::Given
        };
        Ok(Self { rows, label_mode })
    }
}

fn check_width(a: &JacobianDataMatrix, b: &JacobianDataMatrix) -> Result<()> {
    if a.width() != b.width() {
        return Err(Error::DimensionMismatch {
            expected: a.width(),
            found: b.width(),
        });
    }
    Ok(())
}

/// Draws `y ~ p(y|x,w)`; for the Gaussian head `y = ẑ + ε` with `ε ~ N(0, 1)`.
pub fn sample_label(model: &GlmModel, x: &nalgebra::DVector<f64>, rng: &mut impl Rng) -> Result<Label> {
    match model.head().kind() {
        HeadKind::Gaussian => {
            let z = model.logits(x)?[0];
            let eps: f64 = rng.sample(StandardNormal);
            Ok(Label::Real(z + eps))
        }
        HeadKind::Categorical => {
            let p = model.probabilities(x)?;
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (c, pc) in p.iter().enumerate() {
                acc += pc;
                if u < acc {
                    return Ok(Label::Class(c));
                }
            }
            Ok(Label::Class(argmax(&p)))
        }
    }
}

fn hard_label(model: &GlmModel, x: &nalgebra::DVector<f64>) -> Result<Label> {
    let z = model.logits(x)?;
    Ok(match model.head().kind() {
        HeadKind::Gaussian => Label::Real(z[0]),
        HeadKind::Categorical => Label::Class(argmax(&z)),
    })
}

pub fn build_data_matrix(model: &GlmModel, data: &Dataset, mode: LabelMode) -> Result<JacobianDataMatrix> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("data matrix needs at least one point".into()));
    }
    let mut rng = match mode {
        LabelMode::Sampled { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        _ => None,
    };
    let mut rows = DMatrix::zeros(data.len(), model.num_params());
    for i in 0..data.len() {
        let x = data.row(i);
        let y = match mode {
            LabelMode::Hard => hard_label(model, &x)?,
            LabelMode::Sampled { .. } => sample_label(model, &x, rng.as_mut().expect("seeded"))?,
            LabelMode::Given => data.label(i).ok_or(Error::MissingLabels)?,
        };
        rows.set_row(i, &model.score_jacobian(&x, y)?.transpose());
    }
    Ok(JacobianDataMatrix { rows, label_mode: mode })
}

/// `GᵀG`, the one-sample Fisher estimate.
pub fn one_sample_fisher(g: &JacobianDataMatrix) -> PsdMatrix {
    PsdMatrix::from_outer(&g.rows.transpose())
}

/// Mean of `repeats` one-sample estimates `g gᵀ` at a fixed `x`, each with a
/// freshly sampled label.
pub fn mean_one_sample_fisher(
    model: &GlmModel,
    x: &nalgebra::DVector<f64>,
    repeats: usize,
    seed: u64,
) -> Result<PsdMatrix> {
    if repeats == 0 {
        return Err(Error::EmptySampleSet);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = model.num_params();
    let mut acc = DMatrix::zeros(k, k);
    for _ in 0..repeats {
        let y = sample_label(model, x, &mut rng)?;
        let g = model.score_jacobian(x, y)?;
        acc.ger(1.0, &g, &g, 1.0);
    }
    PsdMatrix::from_matrix(acc / repeats as f64)
}

/// `S = G Gᵀ`.
pub fn gram(g: &JacobianDataMatrix) -> PsdMatrix {
    PsdMatrix::from_outer(&g.rows)
}

/// `S_P = G P⁻¹ Gᵀ`.
pub fn gram_weighted(g: &JacobianDataMatrix, precision: &PsdMatrix) -> Result<PsdMatrix> {
    if g.width() != precision.dim() {
        return Err(Error::DimensionMismatch {
            expected: precision.dim(),
            found: g.width(),
        });
    }
    let v = precision.factor()?.solve_lower(&g.rows.transpose())?;
    PsdMatrix::from_matrix(v.tr_mul(&v))
}

/// `G₁ P⁻¹ G₂ᵀ`, or `G₁ G₂ᵀ` without a precision.
pub fn cross(g1: &JacobianDataMatrix, g2: &JacobianDataMatrix, precision: Option<&PsdMatrix>) -> Result<DMatrix<f64>> {
    check_width(g1, g2)?;
    match precision {
        None => Ok(&g1.rows * g2.rows.transpose()),
        Some(p) => {
            if p.dim() != g1.width() {
                return Err(Error::DimensionMismatch {
                    expected: p.dim(),
                    found: g1.width(),
                });
            }
            let f = p.factor()?;
            let v1 = f.solve_lower(&g1.rows.transpose())?;
            let v2 = f.solve_lower(&g2.rows.transpose())?;
            Ok(v1.tr_mul(&v2))
        }
    }
}

/// Which side of the determinant-lemma duality evaluates a log-determinant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    /// Smaller of `n` and `k`.
    Auto,
    /// `n × n`: `log det(G P⁻¹ Gᵀ + Id)`.
    Samples,
    /// `k × k`: `log det(GᵀG + P) − log det P`.
    Weights,
}

/// `½ log det(G P⁻¹ Gᵀ + Id)`.
pub fn eig_via_similarity(g: &JacobianDataMatrix, precision: &PsdMatrix) -> Result<f64> {
    eig_via_similarity_route(g, precision, Route::Auto)
}

pub fn eig_via_similarity_route(g: &JacobianDataMatrix, precision: &PsdMatrix, route: Route) -> Result<f64> {
    if g.is_empty() {
        return Ok(0.0);
    }
    let samples = match route {
        Route::Auto => g.len() <= g.width(),
        Route::Samples => true,
        Route::Weights => false,
    };
    if samples {
        Ok(0.5 * gram_weighted(g, precision)?.add_identity(1.0).factor()?.logdet())
    } else {
        if g.width() != precision.dim() {
            return Err(Error::DimensionMismatch {
                expected: precision.dim(),
                found: g.width(),
            });
        }
        let joint = one_sample_fisher(g).add(precision)?.factor()?.logdet();
        Ok(0.5 * (joint - precision.factor()?.logdet()))
    }
}

/// `½ log det(S + λ Id) − (n/2) log λ`, the EIG under `P = λ Id`.
pub fn eig_uninformative(g: &JacobianDataMatrix, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let n = g.len() as f64;
    Ok(0.5 * logdet_shifted(&gram(g), lambda)? - 0.5 * n * lambda.ln())
}

/// `½ log det S`, the λ-independent part of [`eig_uninformative`] as `λ → 0`.
pub fn eig_uninformative_limit(g: &JacobianDataMatrix) -> Result<f64> {
    Ok(0.5 * logdet_nonsingular(&gram(g))?)
}

/// `½ log det(S_P[eval] + Id) − ½ log det(S_P[acq, eval] + Id) + ½ log det(S_P[acq] + Id)`,
/// approximating `I(Y^eval; Y^acq | x^eval, x^acq, D^train)`.
pub fn epig_via_similarity(acq: &JacobianDataMatrix, eval: &JacobianDataMatrix, precision: &PsdMatrix) -> Result<f64> {
    let joint = acq.stack(eval)?;
    let term = |g: &JacobianDataMatrix| -> Result<f64> {
        if g.is_empty() {
            return Ok(0.0);
        }
        Ok(0.5 * gram_weighted(g, precision)?.add_identity(1.0).factor()?.logdet())
    };
    Ok(term(eval)? - term(&joint)? + term(acq)?)
}

/// The three-term expression under `P = λ Id`; the `log λ` terms cancel.
pub fn epig_uninformative(acq: &JacobianDataMatrix, eval: &JacobianDataMatrix, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let joint = acq.stack(eval)?;
    Ok(0.5
        * (logdet_shifted(&gram(eval), lambda)? - logdet_shifted(&gram(&joint), lambda)?
            + logdet_shifted(&gram(acq), lambda)?))
}

/// `λ → 0` limit: `½ log det S[eval] − ½ log det S[acq, eval] + ½ log det S[acq]`.
pub fn epig_uninformative_limit(acq: &JacobianDataMatrix, eval: &JacobianDataMatrix) -> Result<f64> {
    let joint = acq.stack(eval)?;
    Ok(0.5 * (logdet_nonsingular(&gram(eval))? - logdet_nonsingular(&gram(&joint))? + logdet_nonsingular(&gram(acq))?))
}

/// Proxy with the eval-only term dropped:
/// `log det(S_P[acq] + Id) − log det(S_P[acq, eval] + Id)`; maximized.
pub fn jepig_similarity_proxy(
    acq: &JacobianDataMatrix,
    eval: &JacobianDataMatrix,
    precision: &PsdMatrix,
) -> Result<f64> {
    let joint = acq.stack(eval)?;
    let acq_term = if acq.is_empty() {
        0.0
    } else {
        gram_weighted(acq, precision)?.add_identity(1.0).factor()?.logdet()
    };
    let joint_term = gram_weighted(&joint, precision)?.add_identity(1.0).factor()?.logdet();
    Ok(acq_term - joint_term)
}

/// `log det S[acq] − log det S[acq, eval]`.
pub fn jepig_similarity_proxy_limit(acq: &JacobianDataMatrix, eval: &JacobianDataMatrix) -> Result<f64> {
    let joint = acq.stack(eval)?;
    Ok(logdet_nonsingular(&gram(acq))? - logdet_nonsingular(&gram(&joint))?)
}

/// LogDetMI: `log det S_acq − log det(S_acq − S_cross S_eval⁻¹ S_crossᵀ)`.
///
/// `s_cross` is `n_acq × n_eval`.
pub fn logdet_mi(s_acq: &PsdMatrix, s_eval: &PsdMatrix, s_cross: &DMatrix<f64>) -> Result<f64> {
    if s_cross.nrows() != s_acq.dim() {
        return Err(Error::DimensionMismatch {
            expected: s_acq.dim(),
            found: s_cross.nrows(),
        });
    }
    if s_cross.ncols() != s_eval.dim() {
        return Err(Error::DimensionMismatch {
            expected: s_eval.dim(),
            found: s_cross.ncols(),
        });
    }
    if s_acq.dim() == 0 {
        return Ok(0.0);
    }
    let acq_logdet = logdet_nonsingular(s_acq)?;
    if s_eval.dim() == 0 {
        return Ok(0.0);
    }
    let w = s_eval.factor()?.solve_lower(&s_cross.transpose())?;
    let schur = PsdMatrix::from_matrix(s_acq.matrix() - w.tr_mul(&w))?;
    Ok(acq_logdet - logdet_nonsingular(&schur)?)
}

/// LogDetMI from data matrices, using Euclidean Grams.
pub fn logdet_mi_from_data(acq: &JacobianDataMatrix, eval: &JacobianDataMatrix) -> Result<f64> {
    logdet_mi(&gram(acq), &gram(eval), &cross(acq, eval, None)?)
}

/// LogDetCMI: `LogDetMI(acq ∪ cond; eval) − LogDetMI(cond; eval)`, the
/// approximation of `I(Y^eval; Y^acq | Y^cond, …)` by the chain rule.
pub fn logdet_cmi(acq: &JacobianDataMatrix, eval: &JacobianDataMatrix, cond: &JacobianDataMatrix) -> Result<f64> {
    let with_cond = acq.stack(cond)?;
    Ok(logdet_mi_from_data(&with_cond, eval)? - logdet_mi_from_data(cond, eval)?)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("λ must be positive, got {lambda}")));
    }
    Ok(())
}

fn logdet_shifted(s: &PsdMatrix, lambda: f64) -> Result<f64> {
    if s.dim() == 0 {
        return Ok(0.0);
    }
    Ok(s.add_identity(lambda).factor()?.logdet())
}

fn logdet_nonsingular(s: &PsdMatrix) -> Result<f64> {
    if s.dim() == 0 {
        return Ok(0.0);
    }
    s.factor_strict(SINGULAR_GRAM_TOLERANCE)
        .map(|f| f.logdet())
        .ok_or(Error::SingularGram)
}
