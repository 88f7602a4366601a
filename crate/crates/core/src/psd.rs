//! Dense symmetric positive-semidefinite matrices with Cholesky-backed
//! log-determinants and solves.
//!
//! Every factorization goes through a decadic jitter schedule: the matrix is
//! factorized as `A + εI` for the first `ε` in `{0, b, 10b, …, 1e6·b}` that
//! succeeds, where `b` defaults to `1e-10 · (1 + max diag A)`.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};

/// Number of nonzero jitter steps after the unjittered attempt (`b … 1e6·b`).
pub const JITTER_DECADES: i32 = 6;

/// Relative scale of the first nonzero jitter step.
pub const JITTER_RELATIVE_BASE: f64 = 1e-10;

/// A symmetric positive-semidefinite matrix.
///
/// Construction symmetrizes the input via `(A + Aᵀ) / 2`, so `entries[i][j]`
/// equals `entries[j][i]` bit for bit.
#[derive(Clone, Debug, PartialEq)]
pub struct PsdMatrix {
    m: DMatrix<f64>,
}

impl PsdMatrix {
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        Ok(Self { m: symmetrize(m) })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            m: DMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    pub fn scaled_identity(dim: usize, scale: f64) -> Self {
        Self {
            m: DMatrix::from_diagonal_element(dim, dim, scale),
        }
    }

    /// `Σ wᵢ vᵢ vᵢᵀ` over the columns of `factor`, i.e. `U Uᵀ`.
    pub fn from_outer(factor: &DMatrix<f64>) -> Self {
        Self {
            m: symmetrize(factor * factor.transpose()),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    pub fn max_diagonal(&self) -> f64 {
        self.m.diagonal().iter().copied().fold(0.0_f64, f64::max)
    }

    pub fn add(&self, other: &PsdMatrix) -> Result<PsdMatrix> {
        check_dim(self.dim(), other.dim())?;
        // sum of two exactly symmetric matrices is exactly symmetric
        Ok(Self { m: &self.m + &other.m })
    }

    pub fn add_assign(&mut self, other: &PsdMatrix) -> Result<()> {
        check_dim(self.dim(), other.dim())?;
        self.m += &other.m;
        Ok(())
    }

    pub fn scaled(&self, s: f64) -> PsdMatrix {
        Self { m: &self.m * s }
    }

    pub fn add_identity(&self, eps: f64) -> PsdMatrix {
        let mut m = self.m.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += eps;
        }
        Self { m }
    }

    /// Cholesky factorization under the default jitter schedule.
    pub fn factor(&self) -> Result<PsdFactor> {
        self.factor_with_base(default_jitter_base(self))
    }

    pub fn factor_with_base(&self, base: f64) -> Result<PsdFactor> {
        for eps in jitter_schedule(base) {
            if let Some(f) = try_factor(&self.m, eps) {
                return Ok(f);
            }
        }
        Err(Error::NotPositiveDefinite {
            jitter: base * 10f64.powi(JITTER_DECADES),
        })
    }

    /// Factorization without jitter that also rejects numerically singular
    /// matrices: fails when any squared pivot falls below `rel_tol · max diag`.
    pub fn factor_strict(&self, rel_tol: f64) -> Option<PsdFactor> {
        let f = try_factor(&self.m, 0.0)?;
        let floor = rel_tol * self.max_diagonal();
        let l = f.chol.l_dirty();
        if (0..self.dim()).any(|i| l[(i, i)] * l[(i, i)] <= floor) {
            return None;
        }
        Some(f)
    }
}

/// A Cholesky factor `L Lᵀ = A + εI` with the jitter `ε` that was needed.
#[derive(Clone, Debug)]
pub struct PsdFactor {
    chol: Cholesky<f64, Dyn>,
    jitter: f64,
}

impl PsdFactor {
    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn logdet(&self) -> f64 {
        let l = self.chol.l_dirty();
        2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
    }

    pub fn lower(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn solve(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_dim(self.dim(), b.nrows())?;
        Ok(self.chol.solve(b))
    }

    /// `L⁻¹ B`; `‖L⁻¹ u‖²` equals `uᵀ A⁻¹ u`.
    pub fn solve_lower(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_dim(self.dim(), b.nrows())?;
        Ok(self
            .chol
            .l_dirty()
            .solve_lower_triangular(b)
            .expect("cholesky diagonal is positive"))
    }

    /// `L⁻ᵀ B`, used to map standard normals to draws with covariance `A⁻¹`.
    pub fn solve_lower_transpose(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_dim(self.dim(), b.nrows())?;
        Ok(self
            .chol
            .l_dirty()
            .tr_solve_lower_triangular(b)
            .expect("cholesky diagonal is positive"))
    }
}

pub fn default_jitter_base(a: &PsdMatrix) -> f64 {
    JITTER_RELATIVE_BASE * (1.0 + a.max_diagonal())
}

/// `{0, base, 10·base, …, 1e6·base}`.
pub fn jitter_schedule(base: f64) -> impl Iterator<Item = f64> {
    std::iter::once(0.0).chain((0..=JITTER_DECADES).map(move |d| base * 10f64.powi(d)))
}

/// Returns `A + εI` for the smallest scheduled `ε` that makes Cholesky succeed.
pub fn jitter_to_pd(a: &PsdMatrix, base: f64) -> Result<PsdMatrix> {
    if !(base > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "jitter base must be positive, got {base}"
        )));
    }
    let f = a.factor_with_base(base)?;
    Ok(if f.jitter == 0.0 {
        a.clone()
    } else {
        a.add_identity(f.jitter)
    })
}

pub fn chol_logdet(a: &PsdMatrix) -> Result<f64> {
    Ok(a.factor()?.logdet())
}

pub fn solve_psd(a: &PsdMatrix, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    a.factor()?.solve(b)
}

/// Kronecker product: `K[(i·r + k), (j·s + l)] = A[i][j] · B[k][l]`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// `(A + Aᵀ) / 2`, exactly symmetric.
pub fn symmetrize(mut m: DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

fn try_factor(m: &DMatrix<f64>, eps: f64) -> Option<PsdFactor> {
    let mut shifted = m.clone();
    if eps != 0.0 {
        for i in 0..shifted.nrows() {
            shifted[(i, i)] += eps;
        }
    }
    let chol = Cholesky::new(shifted)?;
    let l = chol.l_dirty();
    let ok = (0..l.nrows()).all(|i| l[(i, i)].is_finite() && l[(i, i)] > 0.0);
    ok.then_some(PsdFactor { chol, jitter: eps })
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> PsdMatrix {
        let g = random_matrix(rng, n, n);
        PsdMatrix::from_outer(&g).add_identity(1.0)
    }

    fn eigen_logdet(a: &PsdMatrix) -> f64 {
        SymmetricEigen::new(a.matrix().clone())
            .eigenvalues
            .iter()
            .map(|l| l.ln())
            .sum()
    }

    #[test]
    fn logdet_identity_and_diagonal() {
        assert_eq!(chol_logdet(&PsdMatrix::identity(3)).unwrap(), 0.0);
        let d = PsdMatrix::scaled_identity(2, 2.0);
        assert!((chol_logdet(&d).unwrap() - 2.0 * 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn logdet_matches_eigenvalue_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let a = random_spd(&mut rng, 5);
            let expected = eigen_logdet(&a);
            let got = chol_logdet(&a).unwrap();
            assert!((got - expected).abs() <= 1e-9 * expected.abs().max(1.0));
        }
    }

    #[test]
    fn logdet_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_spd(&mut rng, 6);
        assert_eq!(
            chol_logdet(&a).unwrap().to_bits(),
            chol_logdet(&a.clone()).unwrap().to_bits()
        );
    }

    #[test]
    fn construction_symmetrizes() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 4.0, 3.0]);
        let p = PsdMatrix::from_matrix(m).unwrap();
        assert_eq!(p.matrix()[(0, 1)], 3.0);
        assert_eq!(p.matrix()[(1, 0)], 3.0);
        assert!(PsdMatrix::from_matrix(DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn solve_identity_and_scalar() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = random_matrix(&mut rng, 4, 3);
        assert_eq!(solve_psd(&PsdMatrix::identity(4), &b).unwrap(), b);
        let x = solve_psd(&PsdMatrix::scaled_identity(1, 4.0), &DMatrix::from_element(1, 1, 8.0)).unwrap();
        assert_eq!(x[(0, 0)], 2.0);
    }

    #[test]
    fn solve_matches_explicit_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let a = random_spd(&mut rng, 6);
            let b = random_matrix(&mut rng, 6, 2);
            let inv = a.matrix().clone().try_inverse().unwrap();
            let oracle = &inv * &b;
            let x = solve_psd(&a, &b).unwrap();
            assert!((&x - &oracle).norm() <= 1e-8 * oracle.norm().max(1.0));
            let resid = a.matrix() * &x - &b;
            assert!(resid.norm() <= 1e-8 * b.norm());
        }
    }

    #[test]
    fn solve_rejects_wrong_rows() {
        let err = solve_psd(&PsdMatrix::identity(3), &DMatrix::zeros(2, 1)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 3, found: 2 }));
    }

    #[test]
    fn kron_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = random_matrix(&mut rng, 3, 2);
        let c = DMatrix::from_element(1, 1, 2.5);
        assert_eq!(kron(&c, &b), &b * 2.5);

        let x = DMatrix::from_column_slice(2, 1, &[1.0, -2.0]);
        let xxt = &x * x.transpose();
        let k = kron(&DMatrix::identity(2, 2), &xxt);
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i / 2 == j / 2 { xxt[(i % 2, j % 2)] } else { 0.0 };
                assert_eq!(k[(i, j)], expected);
            }
        }
    }

    #[test]
    fn kron_matches_elementwise_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_matrix(&mut rng, 2, 2);
        let b = random_matrix(&mut rng, 3, 3);
        let k = kron(&a, &b);
        for i in 0..2 {
            for j in 0..2 {
                for p in 0..3 {
                    for q in 0..3 {
                        assert_eq!(k[(i * 3 + p, j * 3 + q)], a[(i, j)] * b[(p, q)]);
                    }
                }
            }
        }
    }

    #[test]
    fn jitter_leaves_spd_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_spd(&mut rng, 4);
        assert_eq!(jitter_to_pd(&a, 1e-10).unwrap(), a);
    }

    #[test]
    fn jitter_zero_matrix_takes_first_step() {
        let j = jitter_to_pd(&PsdMatrix::zeros(3), 1e-10).unwrap();
        assert_eq!(j, PsdMatrix::scaled_identity(3, 1e-10));
    }

    #[test]
    fn jitter_rank_one_is_smallest_successful_step() {
        let g = DMatrix::from_column_slice(4, 1, &[1.0, 2.0, -1.0, 0.5]);
        let a = PsdMatrix::from_outer(&g);
        let base = default_jitter_base(&a);
        let j = jitter_to_pd(&a, base).unwrap();
        let eps = a.factor_with_base(base).unwrap().jitter();
        assert!(eps > 0.0);
        assert_eq!(j, a.add_identity(eps));
        // re-factorization oracle: the chosen step works, every earlier one fails
        assert!(Cholesky::new(j.matrix().clone()).is_some());
        for step in jitter_schedule(base).take_while(|s| *s < eps) {
            let shifted = a.add_identity(step);
            let ok = Cholesky::new(shifted.matrix().clone())
                .map(|c| (0..4).all(|i| c.l_dirty()[(i, i)] > 0.0))
                .unwrap_or(false);
            assert!(!ok, "step {step:e} should have failed");
        }
    }

    #[test]
    fn jitter_rejects_nonpositive_base() {
        assert!(jitter_to_pd(&PsdMatrix::zeros(2), 0.0).is_err());
    }

    #[test]
    fn exhausted_schedule_errors() {
        let mut m = DMatrix::identity(2, 2);
        m[(1, 1)] = -1.0;
        let a = PsdMatrix::from_matrix(m).unwrap();
        assert!(matches!(chol_logdet(&a), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn strict_factor_rejects_singular() {
        let g = DMatrix::from_column_slice(3, 1, &[1.0, 1.0, 1.0]);
        assert!(PsdMatrix::from_outer(&g).factor_strict(1e-10).is_none());
        assert!(PsdMatrix::identity(3).factor_strict(1e-10).is_some());
    }
}
