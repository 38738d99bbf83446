//! Global solver for the single-ellipsoid trust-region subproblem
//!
//! ```text
//! min ½ xᵀAx + aᵀx   s.t.   (x − c)ᵀB(x − c) ≤ δ²
//! ```
//!
//! The ellipsoid is whitened with the Cholesky factor `B = LLᵀ`
//! (`y = Lᵀ(x − c)`), the reduced Hessian `L⁻¹AL⁻ᵀ` is diagonalized once, and
//! the multiplier is found from the secular equation `‖y(μ)‖ = δ` in the
//! eigenbasis. A [`TrsKernel`] keeps that factorization so that a sequence of
//! problems sharing `(A, B, c, δ)` and differing only in `a` costs `O(n²)`
//! each.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, MetricFactor, SpectralDecomp, SymMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrsConfig {
    /// Tolerance on the three optimality residuals of a returned solution.
    pub kkt_tol: f64,
    /// Hard case when the projection of the reduced linear term on the
    /// critical eigenspace is at most `hard_tol·(1 + ‖ã‖)`.
    pub hard_tol: f64,
    /// Eigenvalues within `mult_tol·(1 + |λ₁|)` of `λ₁` form the critical eigenspace.
    pub mult_tol: f64,
    /// Secular iteration stops once `|‖y‖² − δ²| ≤ root_tol·δ²`.
    pub root_tol: f64,
    pub max_iter: usize,
}

impl Default for TrsConfig {
    fn default() -> Self {
        TrsConfig {
            kkt_tol: 1e-7,
            hard_tol: 1e-8,
            mult_tol: 1e-8,
            root_tol: 1e-10,
            max_iter: 200,
        }
    }
}

/// `min ½xᵀAx + aᵀx  s.t. (x−c)ᵀB(x−c) ≤ δ²`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrsProblem {
    pub hessian: SymMatrix,
    pub linear: DVector<f64>,
    pub shape: SymMatrix,
    pub center: DVector<f64>,
    pub radius: f64,
}

impl TrsProblem {
    pub fn new(
        hessian: SymMatrix,
        linear: DVector<f64>,
        shape: SymMatrix,
        center: DVector<f64>,
        radius: f64,
    ) -> Result<Self> {
        let n = hessian.dim();
        if linear.len() != n || shape.dim() != n || center.len() != n {
            return Err(Error::InvalidProblem(format!(
                "inconsistent dimensions (A: {n}, a: {}, B: {}, c: {})",
                linear.len(),
                shape.dim(),
                center.len()
            )));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidProblem(format!(
                "radius must be positive, got {radius}"
            )));
        }
        if linear.iter().chain(center.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidProblem("non-finite vector entry".into()));
        }
        Ok(TrsProblem {
            hessian,
            linear,
            shape,
            center,
            radius,
        })
    }

    /// The unit-ball form `‖x‖² ≤ δ²`.
    pub fn ball(hessian: SymMatrix, linear: DVector<f64>, radius: f64) -> Result<Self> {
        let n = hessian.dim();
        Self::new(
            hessian,
            linear,
            SymMatrix::identity(n),
            DVector::zeros(n),
            radius,
        )
    }

    pub fn dim(&self) -> usize {
        self.hessian.dim()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * self.hessian.quad(x) + self.linear.dot(x)
    }

    /// `(x−c)ᵀB(x−c)`.
    pub fn constraint_value(&self, x: &DVector<f64>) -> f64 {
        let d = x - &self.center;
        self.shape.quad(&d)
    }
}

/// A global minimizer with its multiplier; in the hard case also the
/// minimum-B-norm solution `q` and a B-orthonormal basis `V` of `N(A + μB)`.
#[derive(Debug, Clone)]
pub struct TrsSolution {
    pub x: DVector<f64>,
    pub mu: f64,
    pub hard_case: bool,
    pub q: Option<DVector<f64>>,
    pub v: Option<DMatrix<f64>>,
    pub objective: f64,
}

/// Residuals of the TRS optimality system at a returned solution.
#[derive(Debug, Clone, Copy)]
pub struct TrsResiduals {
    /// `‖(A+μB)x − (μBc − a)‖`
    pub stationarity: f64,
    /// `|μ((x−c)ᵀB(x−c) − δ²)|`
    pub complementarity: f64,
    /// `max(0, (x−c)ᵀB(x−c) − δ²)`
    pub infeasibility: f64,
    /// Smallest eigenvalue of the pencil-shifted `L⁻¹(A+μB)L⁻ᵀ`.
    pub min_curvature: f64,
}

pub fn trs_residuals(p: &TrsProblem, sol: &TrsSolution) -> Result<TrsResiduals> {
    let bx = p.shape.mul_vec(&(&sol.x - &p.center));
    let grad = p.hessian.mul_vec(&sol.x) + &p.linear + bx * sol.mu;
    let g = p.constraint_value(&sol.x) - p.radius * p.radius;
    let factor = MetricFactor::new(&p.shape)?;
    let shifted = factor.congruence(&p.hessian).shifted(sol.mu);
    let min_curvature = linalg::spectral(&shifted)?.min();
    Ok(TrsResiduals {
        stationarity: grad.norm(),
        complementarity: (sol.mu * g).abs(),
        infeasibility: g.max(0.0),
        min_curvature,
    })
}

/// Result of the diagonal secular solve, in eigen coordinates.
#[derive(Debug, Clone)]
pub(crate) struct DiagOutcome {
    pub y: DVector<f64>,
    pub mu: f64,
    pub hard_case: bool,
    /// Number of leading (critical) eigen directions.
    pub critical: usize,
    /// `y` with the critical components zeroed (hard case only).
    pub y_min_norm: Option<DVector<f64>>,
}

/// Global minimizer of `½ Σ λᵢyᵢ² + Σ gᵢyᵢ` over `‖y‖ ≤ r` (or `‖y‖ = r` when
/// `equality`). `lam` must be ascending.
pub(crate) fn solve_diag(
    lam: &[f64],
    g: &[f64],
    radius: f64,
    equality: bool,
    cfg: &TrsConfig,
) -> DiagOutcome {
    let n = lam.len();
    let lam1 = lam[0];
    let r2 = radius * radius;
    let mult = cfg.mult_tol * (1.0 + lam1.abs());
    let critical = lam.iter().take_while(|&&l| l <= lam1 + mult).count();
    let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let gcrit = g[..critical].iter().map(|v| v * v).sum::<f64>().sqrt();
    let hard_eligible = gcrit <= cfg.hard_tol * (1.0 + gnorm);

    let y_at = |mu: f64, skip: usize| -> DVector<f64> {
        DVector::from_fn(n, |i, _| if i < skip { 0.0 } else { -g[i] / (lam[i] + mu) })
    };

    if !equality {
        if lam1 > mult {
            let y = y_at(0.0, 0);
            if y.norm_squared() <= r2 {
                return DiagOutcome {
                    y,
                    mu: 0.0,
                    hard_case: false,
                    critical,
                    y_min_norm: None,
                };
            }
        } else if lam1 >= -mult && hard_eligible {
            // singular PSD Hessian with a compatible linear term: the
            // minimum-norm stationary point is an interior global minimizer
            let y = y_at(0.0, critical);
            if y.norm_squared() <= r2 {
                return DiagOutcome {
                    y: y.clone(),
                    mu: 0.0,
                    hard_case: true,
                    critical,
                    y_min_norm: Some(y),
                };
            }
        }
    }

    let mu_low = if equality { -lam1 } else { (-lam1).max(0.0) };

    if hard_eligible && (equality || lam1 < -mult) {
        let y_nc = y_at(mu_low, critical);
        let nc2 = y_nc.norm_squared();
        if nc2 <= r2 {
            let t = (r2 - nc2).max(0.0).sqrt();
            let mut y = y_nc.clone();
            y[0] = if g[0] > 0.0 { -t } else { t };
            return DiagOutcome {
                y,
                mu: mu_low,
                hard_case: true,
                critical,
                y_min_norm: Some(y_nc),
            };
        }
    }

    // Easy case: ‖y(μ)‖ = r has a unique root in (mu_low, ∞). Newton on
    // h(μ) = 1/r − 1/‖y(μ)‖ (convex, decreasing) with a bisection safeguard.
    let eval = |mu: f64| -> (f64, f64, f64) {
        let mut s2 = 0.0;
        let mut ds2 = 0.0;
        for i in 0..n {
            let d = lam[i] + mu;
            let w = g[i] * g[i];
            s2 += w / (d * d);
            ds2 -= 2.0 * w / (d * d * d);
        }
        let psi = s2.sqrt();
        let h = 1.0 / radius - 1.0 / psi;
        let dh = ds2 / (2.0 * psi * psi * psi);
        (s2, h, dh)
    };
    let mut lo = mu_low;
    let mut hi = (-lam1 + gnorm / radius).max(mu_low);
    let mut mu = hi;
    let mut best = (f64::INFINITY, mu);
    for _ in 0..cfg.max_iter {
        let (s2, h, dh) = eval(mu);
        let err = (s2 - r2).abs();
        if err < best.0 {
            best = (err, mu);
        }
        if err <= cfg.root_tol * r2 {
            break;
        }
        if h > 0.0 {
            lo = mu;
        } else {
            hi = mu;
        }
        if hi - lo <= 2.0 * f64::EPSILON * hi.abs().max(1.0) {
            break;
        }
        let newton = mu - h / dh;
        mu = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    let mu = best.1;
    DiagOutcome {
        y: y_at(mu, 0),
        mu,
        hard_case: false,
        critical,
        y_min_norm: None,
    }
}

/// Factorization of `(A, B, c, δ)` shared by TRS solves that differ only in
/// the linear term.
#[derive(Debug, Clone)]
pub struct TrsKernel {
    hessian: SymMatrix,
    shape: SymMatrix,
    factor: MetricFactor,
    center: DVector<f64>,
    radius: f64,
    reduced: SpectralDecomp,
    hessian_center: DVector<f64>,
    cfg: TrsConfig,
}

impl TrsKernel {
    pub fn new(p: &TrsProblem, cfg: TrsConfig) -> Result<Self> {
        let factor = MetricFactor::new(&p.shape)?;
        Self::with_factor(&p.hessian, &p.shape, factor, &p.center, p.radius, cfg)
    }

    /// Reuses an existing Cholesky factor of `shape`.
    pub fn with_factor(
        hessian: &SymMatrix,
        shape: &SymMatrix,
        factor: MetricFactor,
        center: &DVector<f64>,
        radius: f64,
        cfg: TrsConfig,
    ) -> Result<Self> {
        let reduced = linalg::spectral(&factor.congruence(hessian))?;
        let hessian_center = hessian.mul_vec(center);
        Ok(TrsKernel {
            hessian: hessian.clone(),
            shape: shape.clone(),
            factor,
            center: center.clone(),
            radius,
            reduced,
            hessian_center,
            cfg,
        })
    }

    pub fn dim(&self) -> usize {
        self.hessian.dim()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn config(&self) -> &TrsConfig {
        &self.cfg
    }

    /// Eigenpairs of the whitened Hessian `L⁻¹AL⁻ᵀ`.
    pub fn reduced_spectrum(&self) -> &SpectralDecomp {
        &self.reduced
    }

    /// `Qᵀ L⁻¹ (Ac + a)`: the linear term in whitened eigen coordinates.
    pub(crate) fn reduced_linear(&self, a: &DVector<f64>) -> DVector<f64> {
        let shifted = &self.hessian_center + a;
        self.reduced
            .eigenvectors
            .tr_mul(&self.factor.lower_solve(&shifted))
    }

    /// Maps whitened eigen coordinates back: `x = c + L⁻ᵀ Q y`.
    pub(crate) fn to_original(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.center + self.factor.upper_solve(&(&self.reduced.eigenvectors * y))
    }

    pub(crate) fn solve_diag(&self, a: &DVector<f64>, equality: bool) -> DiagOutcome {
        let g = self.reduced_linear(a);
        solve_diag(
            self.reduced.eigenvalues.as_slice(),
            g.as_slice(),
            self.radius,
            equality,
            &self.cfg,
        )
    }

    pub fn is_hard_case(&self, a: &DVector<f64>) -> bool {
        self.solve_diag(a, false).hard_case
    }

    /// Global minimizer for the linear term `a`.
    pub fn solve(&self, a: &DVector<f64>) -> TrsSolution {
        let out = self.solve_diag(a, false);
        let x = self.to_original(&out.y);
        let (q, v) = if out.hard_case {
            let q = out.y_min_norm.as_ref().map(|y| self.to_original(y));
            let cols = self
                .reduced
                .eigenvectors
                .columns(0, out.critical)
                .into_owned();
            (q, Some(self.factor.upper_solve_mat(&cols)))
        } else {
            (None, None)
        };
        let objective = 0.5 * self.hessian.quad(&x) + a.dot(&x);
        TrsSolution {
            x,
            mu: out.mu,
            hard_case: out.hard_case,
            q,
            v,
            objective,
        }
    }

    pub fn shape(&self) -> &SymMatrix {
        &self.shape
    }
}

/// Global solution of a single TRS.
pub fn solve_trs(p: &TrsProblem, cfg: &TrsConfig) -> Result<TrsSolution> {
    let kernel = TrsKernel::new(p, *cfg)?;
    Ok(kernel.solve(&p.linear))
}

/// True iff the multiplier sits at the pencil threshold `−λ₁(A, B)` and the
/// stationarity system is singular there.
pub fn detect_hard_case(p: &TrsProblem, kernel: &TrsKernel) -> bool {
    kernel.is_hard_case(&p.linear)
}

/// Minimum-B-norm solution `q` of `(A+μ*B)x = μ*Bc − a` and a B-orthonormal
/// basis `V` of `N(A+μ*B)`, via the positive definite modification
/// `H = A + μ*B + σ Σ Bvᵢvᵢᵀ B`.
pub fn hard_case_solution(
    p: &TrsProblem,
    mu_star: f64,
    sigma: f64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if !(sigma > 0.0) {
        return Err(Error::Config(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let pencil = p.hessian.add_scaled(&p.shape, mu_star);
    let null = linalg::nullspace_basis(&pencil, linalg::RANK_TOL)?;
    let v = linalg::b_orthonormalize(&null, &p.shape)?;
    let bv = p.shape.matrix() * &v;
    let rhs = -(p.hessian.mul_vec(&p.center) + &p.linear);
    let mut sigma = sigma;
    for _ in 0..2 {
        let h = SymMatrix::symmetrized(pencil.matrix() + &bv * bv.transpose() * sigma);
        match linalg::solve_spd(&h, &rhs) {
            Ok(d) => return Ok((d + &p.center, v)),
            Err(_) => sigma *= 10.0,
        }
    }
    Err(Error::Solver(
        "modified hard-case matrix is numerically indefinite".into(),
    ))
}

/// Default σ for [`hard_case_solution`]: `1 + ‖A + μ*B‖_F`.
pub fn default_sigma(p: &TrsProblem, mu_star: f64) -> f64 {
    1.0 + p.hessian.add_scaled(&p.shape, mu_star).frobenius_norm()
}

/// Minimizes `(x−d)ᵀM(x−d)` over the hard-case optimal set
/// `{q + Vα : (q + Vα − c)ᵀB(q + Vα − c) = δ²}` of `own` (or `≤ δ²` when
/// `equality` is false). `V` must be B-orthonormal and `q` the minimum-B-norm
/// solution, so the constraint reduces to `αᵀα = δ² − ‖q − c‖²_B`.
pub fn min_over_optimal_set(
    q: &DVector<f64>,
    v: &DMatrix<f64>,
    own: &TrsProblem,
    target_shape: &SymMatrix,
    target_center: &DVector<f64>,
    equality: bool,
    cfg: &TrsConfig,
) -> Result<DVector<f64>> {
    let r = v.ncols();
    let r2 = own.radius * own.radius;
    let mut rho2 = r2 - own.constraint_value(q);
    if rho2 < 0.0 {
        if rho2 >= -1e-12 * r2.max(1.0) {
            rho2 = 0.0;
        } else {
            return Err(Error::InfeasibleReduction(rho2));
        }
    }
    if r == 0 || rho2 == 0.0 {
        return Ok(q.clone());
    }
    let mv = target_shape.matrix() * v;
    let gram = SymMatrix::symmetrized(v.transpose() * &mv * 2.0);
    let lin = mv.tr_mul(&(q - target_center)) * 2.0;
    let decomp = linalg::spectral(&gram)?;
    let g = decomp.eigenvectors.tr_mul(&lin);
    let out = solve_diag(
        decomp.eigenvalues.as_slice(),
        g.as_slice(),
        rho2.sqrt(),
        equality,
        cfg,
    );
    let alpha = &decomp.eigenvectors * &out.y;
    Ok(q + v * alpha)
}

/// The minimum-Euclidean-norm point of the hard-case optimal set of `p`;
/// returned only if it lies in the ball `‖x‖ ≤ ball_radius`.
pub fn alternate_in_ball(
    q: &DVector<f64>,
    v: &DMatrix<f64>,
    p: &TrsProblem,
    ball_radius: f64,
) -> Result<Option<DVector<f64>>> {
    let n = p.dim();
    let x = min_over_optimal_set(
        q,
        v,
        p,
        &SymMatrix::identity(n),
        &DVector::zeros(n),
        true,
        &TrsConfig::default(),
    )?;
    let limit = ball_radius * ball_radius * (1.0 + 1e-8);
    Ok((x.norm_squared() <= limit).then_some(x))
}
