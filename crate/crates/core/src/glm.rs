//! Exponential-family generalized linear models: logits linear in the weights,
//! a Gaussian (unit variance) or categorical (softmax) likelihood on top.
//!
//! For these models the observed information `H''[y|x,w]` does not depend on
//! `y` and equals the Fisher information `kron(Λ, x xᵀ)`, where `Λ = ∇²A(ẑ)` is
//! the Hessian of the log-partition function at the logits.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::psd::PsdMatrix;

/// Probabilities are clamped to `[PROB_FLOOR, 1 - PROB_FLOOR]` before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeadKind {
    /// Normal likelihood with unit variance; one output.
    Gaussian,
    /// Softmax over `C ≥ 2` classes.
    Categorical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Head {
    kind: HeadKind,
    classes: usize,
}

impl Head {
    pub fn gaussian() -> Self {
        Self {
            kind: HeadKind::Gaussian,
            classes: 1,
        }
    }

    pub fn categorical(classes: usize) -> Result<Self> {
        if classes < 2 {
            return Err(Error::InvalidArgument(format!(
                "categorical head needs at least 2 classes, got {classes}"
            )));
        }
        Ok(Self {
            kind: HeadKind::Categorical,
            classes,
        })
    }

    pub fn kind(&self) -> HeadKind {
        self.kind
    }

    /// Output dimension `C` (1 for the Gaussian head).
    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn is_categorical(&self) -> bool {
        self.kind == HeadKind::Categorical
    }

    pub fn check_label(&self, y: Label) -> Result<()> {
        match (self.kind, y) {
            (HeadKind::Categorical, Label::Class(c)) if c < self.classes => Ok(()),
            (HeadKind::Gaussian, Label::Real(v)) if v.is_finite() => Ok(()),
            _ => Err(Error::LabelOutOfRange { label: y.to_string() }),
        }
    }

    /// `Λ = ∇²A(ẑ)`: `diag(π) - π πᵀ` for the softmax, `1` for the Gaussian.
    pub fn curvature(&self, logits: &DVector<f64>) -> DMatrix<f64> {
        match self.kind {
            HeadKind::Gaussian => DMatrix::from_element(1, 1, 1.0),
            HeadKind::Categorical => {
                let p = softmax(logits);
                let mut lam = -(&p * p.transpose());
                for c in 0..p.len() {
                    lam[(c, c)] += p[c];
                }
                lam
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Label {
    Class(usize),
    Real(f64),
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Label::Class(c) => write!(f, "{c}"),
            Label::Real(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Labels {
    Class(Vec<usize>),
    Real(Vec<f64>),
}

impl Labels {
    pub fn len(&self) -> usize {
        match self {
            Labels::Class(v) => v.len(),
            Labels::Real(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> Label {
        match self {
            Labels::Class(v) => Label::Class(v[i]),
            Labels::Real(v) => Label::Real(v[i]),
        }
    }

    pub fn select(&self, indices: &[usize]) -> Labels {
        match self {
            Labels::Class(v) => Labels::Class(indices.iter().map(|&i| v[i]).collect()),
            Labels::Real(v) => Labels::Real(indices.iter().map(|&i| v[i]).collect()),
        }
    }
}

/// Feature rows (`n × D`) with optional labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: DMatrix<f64>,
    labels: Option<Labels>,
}

impl Dataset {
    pub fn new(features: DMatrix<f64>, labels: Option<Labels>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != features.nrows() {
                return Err(Error::LengthMismatch(features.nrows(), l.len()));
            }
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("feature values must be finite".into()));
        }
        Ok(Self { features, labels })
    }

    pub fn unlabeled(features: DMatrix<f64>) -> Result<Self> {
        Self::new(features, None)
    }

    pub fn from_rows(rows: &[DVector<f64>], labels: Option<Labels>, dim: usize) -> Result<Self> {
        let mut features = DMatrix::zeros(rows.len(), dim);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: r.len(),
                });
            }
            features.row_mut(i).copy_from(&r.transpose());
        }
        Self::new(features, labels)
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> Option<&Labels> {
        self.labels.as_ref()
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.features.row(i).transpose()
    }

    pub fn rows(&self) -> Vec<DVector<f64>> {
        (0..self.len()).map(|i| self.row(i)).collect()
    }

    pub fn label(&self, i: usize) -> Option<Label> {
        self.labels.as_ref().map(|l| l.get(i))
    }

    /// `(x, y)` pairs; errors when the dataset is unlabeled.
    pub fn labeled_rows(&self) -> Result<Vec<(DVector<f64>, Label)>> {
        let labels = self.labels.as_ref().ok_or(Error::MissingLabels)?;
        Ok((0..self.len()).map(|i| (self.row(i), labels.get(i))).collect())
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let features = self.features.select_rows(indices.iter());
        Dataset {
            features,
            labels: self.labels.as_ref().map(|l| l.select(indices)),
        }
    }

    /// Checks that every label is valid for `head`.
    pub fn validate_for(&self, head: Head) -> Result<()> {
        if let Some(l) = &self.labels {
            for i in 0..l.len() {
                head.check_label(l.get(i))?;
            }
        }
        Ok(())
    }
}

/// A GLM head plus a `D × C` weight matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct GlmModel {
    head: Head,
    weights: DMatrix<f64>,
}

impl GlmModel {
    pub fn new(head: Head, weights: DMatrix<f64>) -> Result<Self> {
        if weights.ncols() != head.classes() {
            return Err(Error::DimensionMismatch {
                expected: head.classes(),
                found: weights.ncols(),
            });
        }
        if weights.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("weights must be finite".into()));
        }
        Ok(Self { head, weights })
    }

    pub fn zeros(head: Head, dim: usize) -> Self {
        Self {
            head,
            weights: DMatrix::zeros(dim, head.classes()),
        }
    }

    /// Rebuilds a model from a class-major flat weight vector.
    pub fn from_flat(head: Head, dim: usize, flat: &[f64]) -> Result<Self> {
        let k = dim * head.classes();
        if flat.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: flat.len(),
            });
        }
        // nalgebra storage is column-major, which is exactly class-major here
        Self::new(head, DMatrix::from_column_slice(dim, head.classes(), flat))
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn classes(&self) -> usize {
        self.head.classes()
    }

    /// Weight dimension `k = D · C`.
    pub fn num_params(&self) -> usize {
        self.dim() * self.classes()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    /// Class-major flattening: index `c · D + i`.
    pub fn flat_weights(&self) -> DVector<f64> {
        DVector::from_column_slice(self.weights.as_slice())
    }

    pub fn with_flat_weights(&self, flat: &[f64]) -> Result<Self> {
        Self::from_flat(self.head, self.dim(), flat)
    }

    fn check_input(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// `ẑ = Wᵀ x`.
    pub fn logits(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_input(x)?;
        Ok(self.weights.tr_mul(x))
    }

    /// Softmax probabilities; categorical head only.
    pub fn probabilities(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if !self.head.is_categorical() {
            return Err(Error::UnsupportedHead);
        }
        Ok(softmax(&self.logits(x)?))
    }

    /// Most likely class (lowest index on ties), or the mean for the Gaussian head.
    pub fn predict(&self, x: &DVector<f64>) -> Result<Label> {
        let z = self.logits(x)?;
        Ok(match self.head.kind() {
            HeadKind::Gaussian => Label::Real(z[0]),
            HeadKind::Categorical => Label::Class(argmax(&z)),
        })
    }

    /// Fraction of rows whose predicted class matches the label.
    pub fn accuracy(&self, data: &Dataset) -> Result<f64> {
        let labels = data.labels().ok_or(Error::MissingLabels)?;
        if data.is_empty() {
            return Ok(0.0);
        }
        let mut hits = 0usize;
        for i in 0..data.len() {
            if self.predict(&data.row(i))? == labels.get(i) {
                hits += 1;
            }
        }
        Ok(hits as f64 / data.len() as f64)
    }

    /// Negative log-likelihood `-log p(y | ẑ)` in nats.
    pub fn nll(&self, x: &DVector<f64>, y: Label) -> Result<f64> {
        self.head.check_label(y)?;
        let z = self.logits(x)?;
        Ok(match (self.head.kind(), y) {
            (HeadKind::Gaussian, Label::Real(v)) => 0.5 * (v - z[0]).powi(2) + 0.5 * (2.0 * PI).ln(),
            (HeadKind::Categorical, Label::Class(c)) => {
                let nll = log_sum_exp(&z) - z[c];
                nll.clamp(-(1.0 - PROB_FLOOR).ln(), -PROB_FLOOR.ln())
            }
            _ => unreachable!("label checked above"),
        })
    }

    /// `H'[y|x,w] = -∇_w log p(y|x,w)`, class-major, length `k`.
    pub fn score_jacobian(&self, x: &DVector<f64>, y: Label) -> Result<DVector<f64>> {
        self.head.check_label(y)?;
        let z = self.logits(x)?;
        let residual = match (self.head.kind(), y) {
            (HeadKind::Gaussian, Label::Real(v)) => DVector::from_element(1, z[0] - v),
            (HeadKind::Categorical, Label::Class(c)) => {
                let mut r = softmax(&z);
                r[c] -= 1.0;
                r
            }
            _ => unreachable!("label checked above"),
        };
        Ok(outer_flat(&residual, x))
    }

    /// `H''[y|x,w]`; for a GLM this is `kron(Λ, x xᵀ)` whatever the label.
    pub fn observed_information(&self, x: &DVector<f64>, y: Label) -> Result<PsdMatrix> {
        self.head.check_label(y)?;
        self.fisher_information(x)
    }

    /// `I[Y|x,w] = kron(Λ, x xᵀ)`.
    pub fn fisher_information(&self, x: &DVector<f64>) -> Result<PsdMatrix> {
        let mut acc = DMatrix::zeros(self.num_params(), self.num_params());
        self.accumulate_fisher(&mut acc, x)?;
        PsdMatrix::from_matrix(acc)
    }

    /// `Σᵢ I[Y|xᵢ,w]`; the empty sum is the zero matrix.
    pub fn fisher_batch(&self, xs: &[DVector<f64>]) -> Result<PsdMatrix> {
        let mut acc = DMatrix::zeros(self.num_params(), self.num_params());
        for x in xs {
            self.accumulate_fisher(&mut acc, x)?;
        }
        PsdMatrix::from_matrix(acc)
    }

    /// A `k × C` factor `U` with `U Uᵀ = I[Y|x,w]`: column `y` is `√π_y · H'[y|x,w]`
    /// for the softmax, `x` itself for the Gaussian head.
    pub fn fisher_factor(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_input(x)?;
        let k = self.num_params();
        match self.head.kind() {
            HeadKind::Gaussian => Ok(DMatrix::from_column_slice(k, 1, x.as_slice())),
            HeadKind::Categorical => {
                let c = self.classes();
                let p = softmax(&self.logits(x)?);
                let mut u = DMatrix::zeros(k, c);
                for y in 0..c {
                    let mut r = p.clone();
                    r[y] -= 1.0;
                    r *= p[y].sqrt();
                    u.set_column(y, &outer_flat(&r, x));
                }
                Ok(u)
            }
        }
    }

    /// Adds `kron(Λ(x), x xᵀ)` into `acc` entry by entry.
    pub(crate) fn accumulate_fisher(&self, acc: &mut DMatrix<f64>, x: &DVector<f64>) -> Result<()> {
        let z = self.logits(x)?;
        let lam = self.head.curvature(&z);
        add_kron_outer(acc, &lam, x);
        Ok(())
    }
}

/// `acc[(c·D + i, c'·D + j)] += Λ[c][c'] · x_i x_j`.
fn add_kron_outer(acc: &mut DMatrix<f64>, lam: &DMatrix<f64>, x: &DVector<f64>) {
    let d = x.len();
    let c = lam.nrows();
    for cj in 0..c {
        for j in 0..d {
            let col = cj * d + j;
            for ci in 0..c {
                let l = lam[(ci, cj)];
                if l == 0.0 {
                    continue;
                }
                for i in 0..d {
                    acc[(ci * d + i, col)] += l * (x[i] * x[j]);
                }
            }
        }
    }
}

/// Flattens `r ⊗ x` class-major: entry `c·D + i` is `r_c · x_i`.
fn outer_flat(r: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
    let d = x.len();
    DVector::from_fn(r.len() * d, |idx, _| r[idx / d] * x[idx % d])
}

pub fn log_sum_exp(z: &DVector<f64>) -> f64 {
    let m = z.max();
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

pub fn softmax(z: &DVector<f64>) -> DVector<f64> {
    let m = z.max();
    let e = z.map(|v| (v - m).exp());
    let s = e.sum();
    e / s
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(v: &DVector<f64>) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitOptions {
    pub prior_precision: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            prior_precision: 1.0,
            max_iters: 100,
            tol: 1e-6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitReport {
    pub iters: usize,
    pub grad_norm: f64,
}

/// `Σᵢ nll(xᵢ, yᵢ) + ½ λ ‖w‖²`.
pub fn map_objective(model: &GlmModel, data: &Dataset, prior_precision: f64) -> Result<f64> {
    let mut f = 0.5 * prior_precision * model.flat_weights().norm_squared();
    for (x, y) in data.labeled_rows()? {
        f += model.nll(&x, y)?;
    }
    Ok(f)
}

/// Gradient of [`map_objective`].
pub fn map_gradient(model: &GlmModel, data: &Dataset, prior_precision: f64) -> Result<DVector<f64>> {
    let mut g = model.flat_weights() * prior_precision;
    for (x, y) in data.labeled_rows()? {
        g += model.score_jacobian(&x, y)?;
    }
    Ok(g)
}

/// MAP estimate under an isotropic Gaussian prior with precision `λ`, by
/// Levenberg-damped Newton iteration on the convex objective.
pub fn map_fit(data: &Dataset, head: Head, opts: FitOptions) -> Result<(GlmModel, FitReport)> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("map_fit needs at least one sample".into()));
    }
    if !(opts.prior_precision > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "prior precision must be positive, got {}",
            opts.prior_precision
        )));
    }
    data.validate_for(head)?;
    let pairs = data.labeled_rows()?;
    let lambda = opts.prior_precision;
    let mut model = GlmModel::zeros(head, data.dim());
    let k = model.num_params();
    let mut damping = 0.0_f64;
    let mut f = map_objective(&model, data, lambda)?;

    for iter in 0..opts.max_iters {
        let g = map_gradient(&model, data, lambda)?;
        let grad_norm = g.amax();
        if grad_norm <= opts.tol {
            return Ok((model, FitReport { iters: iter, grad_norm }));
        }
        let mut hess = DMatrix::from_diagonal_element(k, k, lambda);
        for (x, _) in &pairs {
            model.accumulate_fisher(&mut hess, x)?;
        }
        let hess = PsdMatrix::from_matrix(hess)?;
        let w = model.flat_weights();
        loop {
            let step =
                hess.add_identity(damping)
                    .factor()?
                    .solve(&DMatrix::from_column_slice(k, 1, (-&g).as_slice()))?;
            let candidate = model.with_flat_weights((&w + step.column(0)).as_slice())?;
            let f_new = map_objective(&candidate, data, lambda)?;
            if f_new <= f + 1e-14 * f.abs() {
                model = candidate;
                f = f_new;
                damping = if damping < 1e-9 { 0.0 } else { damping / 10.0 };
                break;
            }
            damping = (damping * 10.0).max(1e-6);
            if damping > 1e16 {
                return Err(Error::DidNotConverge {
                    iters: iter,
                    grad_norm,
                    last: Box::new(model),
                });
            }
        }
    }
    let grad_norm = map_gradient(&model, data, lambda)?.amax();
    if grad_norm <= opts.tol {
        return Ok((
            model,
            FitReport {
                iters: opts.max_iters,
                grad_norm,
            },
        ));
    }
    Err(Error::DidNotConverge {
        iters: opts.max_iters,
        grad_norm,
        last: Box::new(model),
    })
}
