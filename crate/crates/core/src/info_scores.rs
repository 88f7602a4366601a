//! Weight-space approximations of the information quantities.
//!
//! With `P = H''[w*|D^train]` the posterior precision and `F` the Fisher
//! information of a candidate batch:
//!
//! | quantity | log-det                                   | trace                    | orientation |
//! |----------|-------------------------------------------|--------------------------|-------------|
//! | EIG      | `½ [log det(F + P) − log det P]`          | `½ Σᵢ tr(P⁻¹ Fᵢ)`        | maximize    |
//! | EPIG     | `½ [log det(Ē + Q) − log det Q]`          | `½ tr(Q⁻¹ Ē)`            | minimize    |
//! | JEPIG    | as EPIG with `E = Σ` instead of the mean  | as EPIG                  | minimize    |
//!
//! where `Q = F + P` and `Ē` is the mean Fisher information of the evaluation
//! set. The EPIG-family values are `MI(Ω; Y^eval | …, Y^acq)` proxies, so lower
//! is better. IG, PIG and JPIG replace Fisher by observed information, which for
//! a GLM gives identical numbers.
//!
//! Log-determinants of `F P⁻¹ + Id` are never formed from the non-symmetric
//! product; the difference of two symmetric log-determinants is used instead.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::glm::{GlmModel, HeadKind, Label};
use crate::posterior::{gaussian_entropy_constant, GaussianPosterior};
use crate::psd::{PsdFactor, PsdMatrix};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScorePair {
    pub logdet: f64,
    pub trace: f64,
}

impl ScorePair {
    pub const ZERO: ScorePair = ScorePair {
        logdet: 0.0,
        trace: 0.0,
    };
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Approx {
    LogDet,
    Trace,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Orientation {
    Maximize,
    Minimize,
}

impl Orientation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Orientation::Maximize => "maximize",
            Orientation::Minimize => "minimize",
        }
    }

    /// `true` when `a` is strictly better than `b`.
    pub fn better(&self, a: f64, b: f64) -> bool {
        match self {
            Orientation::Maximize => a > b,
            Orientation::Minimize => a < b,
        }
    }
}

/// Evaluation-set curvature for the transductive quantities: the mean (EPIG,
/// PIG) or the sum (JEPIG, JPIG) of per-point information matrices.
#[derive(Clone, Debug)]
pub struct EvalInformation {
    matrix: PsdMatrix,
    count: usize,
    joint: bool,
}

impl EvalInformation {
    pub fn matrix(&self) -> &PsdMatrix {
        &self.matrix
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// `true` for the summed (joint) variant.
    pub fn is_joint(&self) -> bool {
        self.joint
    }

    fn from_sum(sum: PsdMatrix, count: usize, joint: bool) -> Result<Self> {
        if count == 0 {
            return Err(Error::EmptyEvalSet);
        }
        let matrix = if joint { sum } else { sum.scaled(1.0 / count as f64) };
        Ok(Self { matrix, count, joint })
    }
}

/// Binds the MAP model `w*` and the posterior precision used by every score.
#[derive(Clone, Debug)]
pub struct Scorer<'a> {
    model: &'a GlmModel,
    posterior: &'a GaussianPosterior,
    precision_factor: PsdFactor,
}

impl<'a> Scorer<'a> {
    pub fn new(model: &'a GlmModel, posterior: &'a GaussianPosterior) -> Result<Self> {
        if model.num_params() != posterior.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.num_params(),
                found: posterior.dim(),
            });
        }
        let precision_factor = posterior.factor()?;
        Ok(Self {
            model,
            posterior,
            precision_factor,
        })
    }

    pub fn model(&self) -> &'a GlmModel {
        self.model
    }

    pub fn posterior(&self) -> &'a GaussianPosterior {
        self.posterior
    }

    pub fn precision(&self) -> &PsdMatrix {
        self.posterior.precision()
    }

    pub fn precision_factor(&self) -> &PsdFactor {
        &self.precision_factor
    }

    fn labeled_information(&self, pairs: &[(DVector<f64>, Label)]) -> Result<Vec<PsdMatrix>> {
        pairs
            .iter()
            .map(|(x, y)| self.model.observed_information(x, *y))
            .collect()
    }

    fn fisher_terms(&self, xs: &[DVector<f64>]) -> Result<Vec<PsdMatrix>> {
        xs.iter().map(|x| self.model.fisher_information(x)).collect()
    }

    fn sum_terms(&self, terms: &[PsdMatrix]) -> Result<PsdMatrix> {
        let mut acc = PsdMatrix::zeros(self.model.num_params());
        for t in terms {
            acc.add_assign(t)?;
        }
        Ok(acc)
    }

    /// EIG/IG pair from per-candidate information matrices.
    fn gain_pair(&self, terms: &[PsdMatrix]) -> Result<ScorePair> {
        if terms.is_empty() {
            return Ok(ScorePair::ZERO);
        }
        let total = self.sum_terms(terms)?;
        let with_data = total.add(self.precision())?.factor()?.logdet();
        let logdet = 0.5 * (with_data - self.precision_factor.logdet());
        let mut trace = 0.0;
        for t in terms {
            trace += self.precision_factor.solve(t.matrix())?.trace();
        }
        Ok(ScorePair {
            logdet,
            trace: 0.5 * trace,
        })
    }

    /// Approximate `I(Ω; Y^acq | x^acq, D^train)` for a candidate batch.
    pub fn eig_score(&self, cand_xs: &[DVector<f64>]) -> Result<ScorePair> {
        let terms = self.fisher_terms(cand_xs)?;
        self.gain_pair(&terms)
    }

    /// Approximate `I(Ω; y^acq | x^acq, D^train)` for labeled candidates.
    pub fn ig_score(&self, cands: &[(DVector<f64>, Label)]) -> Result<ScorePair> {
        let terms = self.labeled_information(cands)?;
        self.gain_pair(&terms)
    }

    /// `½ log det(F + P) − C_k`, a proxy for `−H(Ω | Y^acq, x^acq, D^train)`.
    pub fn conditional_entropy_proxy(&self, cand_xs: &[DVector<f64>]) -> Result<f64> {
        let total = self.model.fisher_batch(cand_xs)?;
        let logdet = total.add(self.precision())?.factor()?.logdet();
        Ok(0.5 * logdet - gaussian_entropy_constant(self.model.num_params()))
    }

    /// Mean (`joint = false`) or summed Fisher information over `eval_xs`.
    pub fn eval_fisher(&self, eval_xs: &[DVector<f64>], joint: bool) -> Result<EvalInformation> {
        let sum = self.model.fisher_batch(eval_xs)?;
        EvalInformation::from_sum(sum, eval_xs.len(), joint)
    }

    /// Mean or summed observed information over a labeled evaluation set.
    pub fn eval_observed(&self, eval: &[(DVector<f64>, Label)], joint: bool) -> Result<EvalInformation> {
        let terms = self.labeled_information(eval)?;
        let sum = self.sum_terms(&terms)?;
        EvalInformation::from_sum(sum, eval.len(), joint)
    }

    /// Transductive proxy pair for candidate information `cand` and eval information `eval`.
    pub fn transductive_pair(&self, cand: &PsdMatrix, eval: &EvalInformation) -> Result<ScorePair> {
        let q = cand.add(self.precision())?;
        let q_factor = q.factor()?;
        let joint = eval.matrix().add(&q)?.factor()?.logdet();
        let logdet = 0.5 * (joint - q_factor.logdet());
        let trace = 0.5 * q_factor.solve(eval.matrix().matrix())?.trace();
        Ok(ScorePair { logdet, trace })
    }

    /// EPIG proxy `MI(Ω; Y^eval | X^eval, Y^acq, x^acq)`; lower is better.
    pub fn epig_score(&self, cand_xs: &[DVector<f64>], eval_xs: &[DVector<f64>]) -> Result<ScorePair> {
        let eval = self.eval_fisher(eval_xs, false)?;
        self.transductive_pair(&self.model.fisher_batch(cand_xs)?, &eval)
    }

    /// JEPIG proxy: as [`Self::epig_score`] with the summed eval Fisher.
    pub fn jepig_score(&self, cand_xs: &[DVector<f64>], eval_xs: &[DVector<f64>]) -> Result<ScorePair> {
        let eval = self.eval_fisher(eval_xs, true)?;
        self.transductive_pair(&self.model.fisher_batch(cand_xs)?, &eval)
    }

    /// PIG proxy from observed information on both sides; lower is better.
    pub fn pig_score(&self, cands: &[(DVector<f64>, Label)], eval: &[(DVector<f64>, Label)]) -> Result<ScorePair> {
        let eval = self.eval_observed(eval, false)?;
        let cand = self.sum_terms(&self.labeled_information(cands)?)?;
        self.transductive_pair(&cand, &eval)
    }

    /// JPIG proxy: as [`Self::pig_score`] with summed eval information.
    pub fn jpig_score(&self, cands: &[(DVector<f64>, Label)], eval: &[(DVector<f64>, Label)]) -> Result<ScorePair> {
        let eval = self.eval_observed(eval, true)?;
        let cand = self.sum_terms(&self.labeled_information(cands)?)?;
        self.transductive_pair(&cand, &eval)
    }

    /// Expected squared gradient norm `E_{p(y|x,w*)} ‖H'[y|x,w*]‖²`, summed
    /// exactly over classes.
    pub fn egl_score(&self, x: &DVector<f64>) -> Result<f64> {
        egl(self.model, x)
    }

    /// Scores every pool point as a singleton batch under `objective`.
    ///
    /// Uses the low-rank updates of [`IncrementalObjective`]; agrees with the
    /// direct formulas up to rounding.
    pub fn singleton_scores(&self, pool: &[DVector<f64>], objective: &SetObjective) -> Result<Vec<f64>> {
        let state = IncrementalObjective::new(self, objective.clone())?;
        pool.par_iter()
            .map(|x| {
                let u = self.model.fisher_factor(x)?;
                state.value_with(&u)
            })
            .collect()
    }
}

/// `E_{p(y|x,w*)} ‖H'[y|x,w*]‖²`.
pub fn egl(model: &GlmModel, x: &DVector<f64>) -> Result<f64> {
    match model.head().kind() {
        // E[(y − ẑ)²] = 1 under the unit-variance likelihood
        HeadKind::Gaussian => {
            model.logits(x)?;
            Ok(x.norm_squared())
        }
        HeadKind::Categorical => {
            let p = model.probabilities(x)?;
            let mut total = 0.0;
            for y in 0..model.classes() {
                total += p[y] * model.score_jacobian(x, Label::Class(y))?.norm_squared();
            }
            Ok(total)
        }
    }
}

/// GraNd: mean over weight samples (rows of `samples`) of `‖H'[y|x,w]‖²`.
pub fn grand_score(model: &GlmModel, x: &DVector<f64>, y: Label, samples: &DMatrix<f64>) -> Result<f64> {
    model.head().check_label(y)?;
    if samples.nrows() == 0 {
        return Err(Error::EmptySampleSet);
    }
    if samples.ncols() != model.num_params() {
        return Err(Error::DimensionMismatch {
            expected: model.num_params(),
            found: samples.ncols(),
        });
    }
    let mut total = 0.0;
    for row in samples.row_iter() {
        let w = model.with_flat_weights(row.transpose().as_slice())?;
        total += w.score_jacobian(x, y)?.norm_squared();
    }
    Ok(total / samples.nrows() as f64)
}

/// A set function over candidate batches, evaluated in weight space.
#[derive(Clone, Debug)]
pub enum SetObjective {
    /// EIG approximation; maximized.
    Eig(Approx),
    /// EPIG / JEPIG proxy, depending on the eval information; minimized.
    Transductive(Approx, EvalInformation),
}

impl SetObjective {
    pub fn orientation(&self) -> Orientation {
        match self {
            SetObjective::Eig(_) => Orientation::Maximize,
            SetObjective::Transductive(..) => Orientation::Minimize,
        }
    }

    pub fn approx(&self) -> Approx {
        match self {
            SetObjective::Eig(a) | SetObjective::Transductive(a, _) => *a,
        }
    }

    pub fn name(&self) -> String {
        let a = match self.approx() {
            Approx::LogDet => "logdet",
            Approx::Trace => "trace",
        };
        match self {
            SetObjective::Eig(_) => format!("eig_{a}"),
            SetObjective::Transductive(_, e) if e.is_joint() => format!("jepig_{a}"),
            SetObjective::Transductive(..) => format!("epig_{a}"),
        }
    }

    /// Direct dense evaluation on a batch.
    pub fn value(&self, scorer: &Scorer<'_>, xs: &[DVector<f64>]) -> Result<f64> {
        let pair = match self {
            SetObjective::Eig(_) => scorer.eig_score(xs)?,
            SetObjective::Transductive(_, eval) => scorer.transductive_pair(&scorer.model.fisher_batch(xs)?, eval)?,
        };
        Ok(match self.approx() {
            Approx::LogDet => pair.logdet,
            Approx::Trace => pair.trace,
        })
    }
}

/// Objective value of a growing batch `S`, with cheap evaluation of `S ∪ {x}`
/// through rank-`C` updates (matrix-determinant lemma and Woodbury identity)
/// on the candidate's Fisher factor `U` (`U Uᵀ = I[Y|x,w*]`).
#[derive(Clone, Debug)]
pub struct IncrementalObjective<'s> {
    scorer: &'s Scorer<'s>,
    objective: SetObjective,
    /// `Q = Σ_{i∈S} Fᵢ + P`.
    q: PsdMatrix,
    q_factor: PsdFactor,
    /// Factor of `E + Q` (transductive log-det only).
    r_factor: Option<PsdFactor>,
    /// `Q⁻¹ E Q⁻¹` (transductive trace only).
    sandwich: Option<DMatrix<f64>>,
    value: f64,
}

impl<'s> IncrementalObjective<'s> {
    pub fn new(scorer: &'s Scorer<'s>, objective: SetObjective) -> Result<Self> {
        let q = scorer.precision().clone();
        let q_factor = scorer.precision_factor().clone();
        let mut state = Self {
            scorer,
            objective,
            q,
            q_factor,
            r_factor: None,
            sandwich: None,
            value: 0.0,
        };
        state.refresh(0.0)?;
        Ok(state)
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn objective(&self) -> &SetObjective {
        &self.objective
    }

    /// Objective of `S ∪ {x}` where `u` is the Fisher factor of `x`.
    pub fn value_with(&self, u: &DMatrix<f64>) -> Result<f64> {
        Ok(self.value + self.gain(u)?)
    }

    /// Change in the objective from adding `x` to `S`.
    pub fn gain(&self, u: &DMatrix<f64>) -> Result<f64> {
        match &self.objective {
            SetObjective::Eig(Approx::LogDet) => Ok(0.5 * capacitance_logdet(&self.q_factor, u)?),
            SetObjective::Eig(Approx::Trace) => {
                let v = self.scorer.precision_factor().solve_lower(u)?;
                Ok(0.5 * v.norm_squared())
            }
            SetObjective::Transductive(Approx::LogDet, _) => {
                let r = self.r_factor.as_ref().expect("set for transductive log-det");
                Ok(0.5 * (capacitance_logdet(r, u)? - capacitance_logdet(&self.q_factor, u)?))
            }
            SetObjective::Transductive(Approx::Trace, _) => {
                let b = self.sandwich.as_ref().expect("set for transductive trace");
                let v = self.q_factor.solve_lower(u)?;
                let cap = PsdMatrix::from_matrix(v.tr_mul(&v))?.add_identity(1.0);
                let inner = u.tr_mul(&(b * u));
                Ok(-0.5 * cap.factor()?.solve(&inner)?.trace())
            }
        }
    }

    /// Adds a candidate (by Fisher factor) to `S`.
    pub fn commit(&mut self, u: &DMatrix<f64>) -> Result<()> {
        let added = match self.objective {
            SetObjective::Eig(Approx::Trace) => 0.5 * self.scorer.precision_factor().solve_lower(u)?.norm_squared(),
            _ => 0.0,
        };
        self.q.add_assign(&PsdMatrix::from_outer(u))?;
        self.q_factor = self.q.factor()?;
        self.refresh(self.value + added)
    }

    fn refresh(&mut self, trace_sum: f64) -> Result<()> {
        let p_logdet = self.scorer.precision_factor().logdet();
        self.value = match &self.objective {
            SetObjective::Eig(Approx::LogDet) => 0.5 * (self.q_factor.logdet() - p_logdet),
            SetObjective::Eig(Approx::Trace) => trace_sum,
            SetObjective::Transductive(Approx::LogDet, eval) => {
                let r = eval.matrix().add(&self.q)?.factor()?;
                let v = 0.5 * (r.logdet() - self.q_factor.logdet());
                self.r_factor = Some(r);
                v
            }
            SetObjective::Transductive(Approx::Trace, eval) => {
                let qe = self.q_factor.solve(eval.matrix().matrix())?;
                let v = 0.5 * qe.trace();
                // Q⁻¹ E Q⁻¹ = Q⁻¹ (Q⁻¹ E)ᵀ since Q and E are symmetric
                self.sandwich = Some(self.q_factor.solve(&qe.transpose())?);
                v
            }
        };
        Ok(())
    }
}

/// `log det(I + Uᵀ A⁻¹ U)` from a factor of `A`.
fn capacitance_logdet(a: &PsdFactor, u: &DMatrix<f64>) -> Result<f64> {
    let v = a.solve_lower(u)?;
    let cap = PsdMatrix::from_matrix(v.tr_mul(&v))?.add_identity(1.0);
    Ok(cap.factor()?.logdet())
}
