//! Dense symmetric kernels: spectral decomposition, symmetric-definite
//! pencils, SPD solves and nullspace bases.
//!
//! Everything here is dense. The factorizations come from `nalgebra`; this
//! module fixes the conventions the solvers rely on (ascending eigenvalues,
//! canonical symmetrization, B-orthonormal bases).

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::LinalgError;

type Result<T> = std::result::Result<T, LinalgError>;

/// Relative asymmetry accepted by [`SymMatrix::new`].
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Default relative tolerance used to decide numerical rank.
pub const RANK_TOL: f64 = 1e-8;

const EIGEN_MAX_ITER: usize = 100_000;

/// A dense real symmetric matrix, stored canonically symmetrized.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Validates squareness, finiteness and symmetry, then stores `(M + Mᵀ)/2`.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 {
            return Err(LinalgError::InvalidMatrix("empty matrix".into()));
        }
        if m.nrows() != m.ncols() {
            return Err(LinalgError::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::InvalidMatrix("non-finite entry".into()));
        }
        let scale = m.amax();
        let n = m.nrows();
        let mut asym = 0.0_f64;
        for j in 0..n {
            for i in 0..j {
                asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
        if asym > SYMMETRY_TOL * (1.0 + scale) {
            return Err(LinalgError::InvalidMatrix(format!(
                "matrix is not symmetric (max asymmetry {asym:e})"
            )));
        }
        Ok(Self::symmetrized(m))
    }

    /// Symmetrizes without checking. Panics on a non-square matrix.
    pub fn symmetrized(m: DMatrix<f64>) -> Self {
        assert!(m.is_square(), "symmetric matrix must be square");
        let sym = (&m + m.transpose()) * 0.5;
        SymMatrix(sym)
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(DMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix(DMatrix::zeros(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    /// Builds from row-major entries; the result is validated by [`SymMatrix::new`].
    pub fn from_row_slice(n: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != n * n {
            return Err(LinalgError::DimensionMismatch {
                expected: n * n,
                found: entries.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(n, n, entries))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn scaled(&self, s: f64) -> Self {
        SymMatrix(&self.0 * s)
    }

    /// `self + s·other`.
    pub fn add_scaled(&self, other: &SymMatrix, s: f64) -> Self {
        SymMatrix(&self.0 + &other.0 * s)
    }

    /// `self + s·I`.
    pub fn shifted(&self, s: f64) -> Self {
        let mut m = self.0.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += s;
        }
        SymMatrix(m)
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.0 * x
    }

    /// `xᵀ M x`.
    pub fn quad(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.0 * x))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.dim();
        (0..n).all(|j| (0..n).all(|i| i == j || self.0[(i, j)] == 0.0))
    }

    /// Fraction of structurally nonzero entries.
    pub fn density(&self) -> f64 {
        let nnz = self.0.iter().filter(|v| **v != 0.0).count();
        nnz as f64 / (self.dim() * self.dim()) as f64
    }
}

impl std::ops::Index<(usize, usize)> for SymMatrix {
    type Output = f64;
    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

/// `M = Q Λ Qᵀ` with eigenvalues ascending and orthonormal columns in `Q`.
#[derive(Debug, Clone)]
pub struct SpectralDecomp {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl SpectralDecomp {
    pub fn min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.eigenvectors
            * DMatrix::from_diagonal(&self.eigenvalues)
            * self.eigenvectors.transpose()
    }
}

/// Full symmetric eigendecomposition, eigenvalues ascending.
pub fn spectral(m: &SymMatrix) -> Result<SpectralDecomp> {
    let eig = SymmetricEigen::try_new(m.matrix().clone(), f64::EPSILON, EIGEN_MAX_ITER).ok_or(
        LinalgError::EigenNoConvergence {
            iterations: EIGEN_MAX_ITER,
        },
    )?;
    let n = m.dim();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(SpectralDecomp {
        eigenvalues,
        eigenvectors,
    })
}

/// Cholesky factor `B = L Lᵀ` of a positive definite metric, with the
/// identity special-cased so that unit-ball problems pay nothing.
#[derive(Debug, Clone)]
pub struct MetricFactor {
    n: usize,
    lower: Option<DMatrix<f64>>,
}

impl MetricFactor {
    pub fn identity(n: usize) -> Self {
        MetricFactor { n, lower: None }
    }

    pub fn new(b: &SymMatrix) -> Result<Self> {
        let n = b.dim();
        if *b == SymMatrix::identity(n) {
            return Ok(Self::identity(n));
        }
        let chol = Cholesky::new(b.matrix().clone()).ok_or(LinalgError::NotPositiveDefinite)?;
        Ok(MetricFactor {
            n,
            lower: Some(chol.unpack()),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_identity(&self) -> bool {
        self.lower.is_none()
    }

    /// `L⁻¹ v`.
    pub fn lower_solve(&self, v: &DVector<f64>) -> DVector<f64> {
        match &self.lower {
            None => v.clone(),
            Some(l) => l
                .solve_lower_triangular(v)
                .expect("Cholesky factor has a nonzero diagonal"),
        }
    }

    /// `L⁻ᵀ v`.
    pub fn upper_solve(&self, v: &DVector<f64>) -> DVector<f64> {
        match &self.lower {
            None => v.clone(),
            Some(l) => l
                .tr_solve_lower_triangular(v)
                .expect("Cholesky factor has a nonzero diagonal"),
        }
    }

    /// `L⁻ᵀ M` column by column.
    pub fn upper_solve_mat(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.lower {
            None => m.clone(),
            Some(l) => l
                .tr_solve_lower_triangular(m)
                .expect("Cholesky factor has a nonzero diagonal"),
        }
    }

    /// The congruence `L⁻¹ A L⁻ᵀ`.
    pub fn congruence(&self, a: &SymMatrix) -> SymMatrix {
        match &self.lower {
            None => a.clone(),
            Some(l) => {
                let x = l
                    .solve_lower_triangular(a.matrix())
                    .expect("Cholesky factor has a nonzero diagonal");
                let c = l
                    .solve_lower_triangular(&x.transpose())
                    .expect("Cholesky factor has a nonzero diagonal");
                SymMatrix::symmetrized(c)
            }
        }
    }
}

/// Largest generalized eigenpair of `P v = λ Q v` for positive definite `Q`,
/// with `‖v‖ = 1`.
pub fn gen_eig_max(p: &SymMatrix, q: &SymMatrix) -> Result<(f64, DVector<f64>)> {
    if p.dim() != q.dim() {
        return Err(LinalgError::DimensionMismatch {
            expected: p.dim(),
            found: q.dim(),
        });
    }
    let factor = MetricFactor::new(q).map_err(|_| LinalgError::PencilError)?;
    let reduced = factor.congruence(p);
    let decomp = spectral(&reduced)?;
    let n = p.dim();
    let y = decomp.eigenvectors.column(n - 1).into_owned();
    let mut v = factor.upper_solve(&y);
    let norm = v.norm();
    v /= norm;
    Ok((decomp.max(), v))
}

/// Solves `M x = b` for positive definite `M`.
pub fn solve_spd(m: &SymMatrix, b: &DVector<f64>) -> Result<DVector<f64>> {
    if b.len() != m.dim() {
        return Err(LinalgError::DimensionMismatch {
            expected: m.dim(),
            found: b.len(),
        });
    }
    let chol = Cholesky::new(m.matrix().clone()).ok_or(LinalgError::NotPositiveDefinite)?;
    Ok(chol.solve(b))
}

/// Orthonormal basis of the numerical nullspace: eigenvectors whose
/// eigenvalues satisfy `|λ| ≤ tol·(1 + max|λ|)`. May have zero columns.
pub fn nullspace_basis(m: &SymMatrix, tol: f64) -> Result<DMatrix<f64>> {
    let decomp = spectral(m)?;
    let scale = decomp.min().abs().max(decomp.max().abs());
    let cutoff = tol * (1.0 + scale);
    let cols: Vec<usize> = (0..m.dim())
        .filter(|&i| decomp.eigenvalues[i].abs() <= cutoff)
        .collect();
    let mut basis = DMatrix::zeros(m.dim(), cols.len());
    for (dst, &src) in cols.iter().enumerate() {
        basis.set_column(dst, &decomp.eigenvectors.column(src));
    }
    Ok(basis)
}

/// Returns `W` spanning the same space as `V` with `Wᵀ B W = I`.
pub fn b_orthonormalize(v: &DMatrix<f64>, b: &SymMatrix) -> Result<DMatrix<f64>> {
    if v.nrows() != b.dim() {
        return Err(LinalgError::DimensionMismatch {
            expected: b.dim(),
            found: v.nrows(),
        });
    }
    if v.ncols() == 0 {
        return Ok(v.clone());
    }
    let gram = v.transpose() * b.matrix() * v;
    let gram = (&gram + gram.transpose()) * 0.5;
    let scale = gram.diagonal().amax();
    let chol = Cholesky::new(gram).ok_or(LinalgError::RankError)?;
    let r = chol.unpack();
    let min_pivot = r.diagonal().iter().fold(f64::INFINITY, |m, d| m.min(d * d));
    if !(min_pivot > 1e-14 * scale) {
        return Err(LinalgError::RankError);
    }
    let wt = r
        .solve_lower_triangular(&v.transpose())
        .ok_or(LinalgError::RankError)?;
    Ok(wt.transpose())
}
