use nalgebra::{DVector, Matrix2, Vector2};

use crate::error::Result;
use crate::linalg;
use crate::problem::TtrsProblem;

/// Eigenvalues of the Lagrangian Hessian below `−NEGATIVE_EIG_TOL` count as negative.
pub const NEGATIVE_EIG_TOL: f64 = 1e-8;

/// Constraints with relative slack below this are treated as active.
pub const ACTIVE_TOL: f64 = 1e-8;

/// Inertia class of `H(γ, μ) = A + γI + μB` at a KKT point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurvatureClass {
    /// Positive semidefinite: the point is a global minimizer.
    Psd,
    /// Exactly one negative eigenvalue.
    OneNegative,
    /// Two or more negative eigenvalues: not a local minimizer under LICQ.
    ManyNegative,
    /// Active constraint gradients are linearly dependent.
    Unknown,
}

impl CurvatureClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            CurvatureClass::Psd => "psd",
            CurvatureClass::OneNegative => "one_negative",
            CurvatureClass::ManyNegative => "many_negative",
            CurvatureClass::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone)]
pub struct KktPoint {
    pub x: DVector<f64>,
    pub gamma: f64,
    pub mu: f64,
    /// `‖(A + γI + μB)x + a − μBc‖`
    pub stationarity_residual: f64,
    /// `(|γ(‖x‖² − δ₁²)|, |μ((x−c)ᵀB(x−c) − δ₂²)|)`
    pub comp_residuals: (f64, f64),
    pub curvature_class: CurvatureClass,
    /// Smallest eigenvalue of `H(γ, μ)`.
    pub min_eigenvalue: f64,
    pub negative_eigenvalues: usize,
    pub ball_active: bool,
    pub ellipsoid_active: bool,
}

impl KktPoint {
    /// Both constraints active.
    pub fn two_active(&self) -> bool {
        self.ball_active && self.ellipsoid_active
    }

    /// Sufficient global optimality: `H ⪰ −tol·I` and every residual at most
    /// `tol` relative to `1 + ‖a‖ + ‖Ax‖`.
    pub fn is_global(&self, p: &TtrsProblem, tol: f64) -> bool {
        let scale = 1.0 + p.linear.norm() + p.hessian.mul_vec(&self.x).norm();
        self.min_eigenvalue >= -tol
            && self.gamma >= 0.0
            && self.mu >= 0.0
            && self.stationarity_residual <= tol * scale
            && self.comp_residuals.0 <= tol * scale
            && self.comp_residuals.1 <= tol * scale
            && p.is_feasible(&self.x, ACTIVE_TOL)
    }
}

fn stationarity(p: &TtrsProblem, x: &DVector<f64>, gamma: f64, mu: f64) -> DVector<f64> {
    let d = x - &p.center;
    p.gradient(x) + x * gamma + p.shape.mul_vec(&d) * mu
}

fn activity(p: &TtrsProblem, x: &DVector<f64>) -> (bool, bool) {
    let d1 = p.delta1 * p.delta1;
    let d2 = p.delta2 * p.delta2;
    (
        x.norm_squared() >= d1 * (1.0 - ACTIVE_TOL),
        p.shape.quad(&(x - &p.center)) >= d2 * (1.0 - ACTIVE_TOL),
    )
}

/// Fills the KKT residuals and the inertia of the Lagrangian Hessian.
pub fn certify(p: &TtrsProblem, x: &DVector<f64>, gamma: f64, mu: f64) -> Result<KktPoint> {
    let stationarity_residual = stationarity(p, x, gamma, mu).norm();
    let comp_residuals = (
        (gamma * p.ball_slack(x)).abs(),
        (mu * p.ellipsoid_slack(x)).abs(),
    );
    let h = p.hessian.add_scaled(&p.shape, mu).shifted(gamma);
    let spec = linalg::spectral(&h)?;
    let negative_eigenvalues = spec
        .eigenvalues
        .iter()
        .filter(|&&l| l < -NEGATIVE_EIG_TOL)
        .count();
    let (ball_active, ellipsoid_active) = activity(p, x);

    let licq = {
        let g1 = x.clone();
        let g2 = p.shape.mul_vec(&(x - &p.center));
        match (ball_active, ellipsoid_active) {
            (true, true) => {
                let cos = g1.dot(&g2).abs() / (g1.norm() * g2.norm());
                cos.is_finite() && cos < 1.0 - 1e-10
            }
            (true, false) => g1.norm() > 0.0,
            (false, true) => g2.norm() > 0.0,
            (false, false) => true,
        }
    };
    let curvature_class = if !licq {
        CurvatureClass::Unknown
    } else {
        match negative_eigenvalues {
            0 => CurvatureClass::Psd,
            1 => CurvatureClass::OneNegative,
            _ => CurvatureClass::ManyNegative,
        }
    };
    Ok(KktPoint {
        x: x.clone(),
        gamma,
        mu,
        stationarity_residual,
        comp_residuals,
        curvature_class,
        min_eigenvalue: spec.min(),
        negative_eigenvalues,
        ball_active,
        ellipsoid_active,
    })
}

/// Nonnegative least-squares fit of the stationarity condition over
/// `(γ, μ)`, with the multiplier of an inactive constraint fixed at zero.
pub fn recover_multipliers(p: &TtrsProblem, x: &DVector<f64>) -> (f64, f64) {
    let (ball_active, ellipsoid_active) = activity(p, x);
    let g0 = p.gradient(x);
    let u = x.clone();
    let v = p.shape.mul_vec(&(x - &p.center));
    let residual = |gamma: f64, mu: f64| (&g0 + &u * gamma + &v * mu).norm();

    let mut best = ((0.0, 0.0), residual(0.0, 0.0));
    let mut consider = |gamma: f64, mu: f64| {
        if gamma >= 0.0 && mu >= 0.0 && gamma.is_finite() && mu.is_finite() {
            let r = residual(gamma, mu);
            if r < best.1 {
                best = ((gamma, mu), r);
            }
        }
    };
    if ball_active && u.norm_squared() > 0.0 {
        consider(-g0.dot(&u) / u.norm_squared(), 0.0);
    }
    if ellipsoid_active && v.norm_squared() > 0.0 {
        consider(0.0, -g0.dot(&v) / v.norm_squared());
    }
    if ball_active && ellipsoid_active {
        let m = Matrix2::new(u.dot(&u), u.dot(&v), u.dot(&v), v.dot(&v));
        let rhs = Vector2::new(-g0.dot(&u), -g0.dot(&v));
        if let Some(sol) = m.lu().solve(&rhs) {
            consider(sol[0], sol[1]);
        }
    }
    best.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::worked_examples;
    use crate::linalg::SymMatrix;

    fn vec(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn interior_stationary_point_has_zero_multipliers() {
        let p = TtrsProblem::new(
            SymMatrix::from_diagonal(&[2.0, 1.0]),
            vec(&[-1.0, 0.0]),
            SymMatrix::identity(2),
            DVector::zeros(2),
            2.0,
            2.0,
        )
        .unwrap();
        let x = vec(&[0.5, 0.0]);
        assert_eq!(recover_multipliers(&p, &x), (0.0, 0.0));
        let k = certify(&p, &x, 0.0, 0.0).unwrap();
        assert_eq!(k.stationarity_residual, 0.0);
        assert_eq!(k.curvature_class, CurvatureClass::Psd);
        assert!(k.is_global(&p, 1e-7));
    }

    #[test]
    fn first_example_optimum_multipliers() {
        let ex = &worked_examples()[0];
        let p = &ex.problem;
        for x in &ex.optima {
            let (g, m) = recover_multipliers(p, x);
            // independent 2×2 solve of (A + γI + μB)x + a = 0
            let bx = p.shape.mul_vec(x);
            let g0 = p.gradient(x);
            let mat = Matrix2::new(x[0], bx[0], x[1], bx[1]);
            let sol = mat.lu().solve(&Vector2::new(-g0[0], -g0[1])).unwrap();
            assert!((g - sol[0]).abs() < 1e-9 && (m - sol[1]).abs() < 1e-9);
            let k = certify(p, x, g, m).unwrap();
            assert!(k.stationarity_residual <= 1e-6);
            assert!(k.two_active());
        }
    }

    #[test]
    fn second_example_taxonomy() {
        let ex = &worked_examples()[1];
        let p = &ex.problem;
        let s = 8f64.sqrt();
        let (r3, r5) = (3f64.sqrt(), 5f64.sqrt());
        let classify = |x: DVector<f64>| {
            let (g, m) = recover_multipliers(p, &x);
            certify(p, &x, g, m).unwrap()
        };
        let global = classify(vec(&[r3 / s, -r5 / s]));
        assert!(global.stationarity_residual < 1e-12);
        assert_eq!(global.curvature_class, CurvatureClass::OneNegative);
        let local = classify(vec(&[-r3 / s, r5 / s]));
        assert_eq!(local.negative_eigenvalues, 1);
        let saddle = classify(vec(&[r3 / s, r5 / s]));
        assert_eq!(saddle.negative_eigenvalues, 2);
        assert_eq!(saddle.curvature_class, CurvatureClass::ManyNegative);
    }

    #[test]
    fn tangential_contact_is_unknown() {
        // ball and a concentric ellipsoid touching along e₁
        let p = TtrsProblem::new(
            SymMatrix::from_diagonal(&[-1.0, 1.0]),
            DVector::zeros(2),
            SymMatrix::from_diagonal(&[1.0, 4.0]),
            DVector::zeros(2),
            1.0,
            1.0,
        )
        .unwrap();
        let k = certify(&p, &vec(&[1.0, 0.0]), 0.5, 0.5).unwrap();
        assert_eq!(k.curvature_class, CurvatureClass::Unknown);
    }
}
