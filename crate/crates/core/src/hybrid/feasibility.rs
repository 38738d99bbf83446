use nalgebra::DVector;

use crate::error::Result;
use crate::problem::TtrsProblem;
use crate::trs::{solve_trs, TrsConfig, TrsProblem};

/// Problems with `v_ch` at most this value are feasible.
pub const FEASIBILITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct Feasibility {
    pub feasible: bool,
    pub witness: Option<DVector<f64>>,
    /// `min (x−c)ᵀB(x−c) − δ₂²` over the ball.
    pub v_ch: f64,
}

/// Decides whether the two ellipsoids intersect by minimizing the ellipsoid
/// constraint over the ball (a convex TRS).
pub fn check_feasibility(p: &TtrsProblem) -> Result<Feasibility> {
    let n = p.dim();
    let bc = p.shape.mul_vec(&p.center);
    let trs = TrsProblem {
        hessian: p.shape.scaled(2.0),
        linear: -&bc * 2.0,
        shape: crate::linalg::SymMatrix::identity(n),
        center: DVector::zeros(n),
        radius: p.delta1,
    };
    let cfg = TrsConfig {
        root_tol: 1e-15,
        ..TrsConfig::default()
    };
    let sol = solve_trs(&trs, &cfg)?;
    let mut x = sol.x;
    let norm = x.norm();
    if norm > p.delta1 {
        x *= p.delta1 / norm;
    }
    let v_ch = p.ellipsoid_slack(&x);
    let feasible = v_ch <= FEASIBILITY_TOL;
    Ok(Feasibility {
        feasible,
        witness: feasible.then_some(x),
        v_ch,
    })
}

/// Relative depth of `x` inside the feasible region: the smaller of
/// `−slack₁/δ₁²` and `−slack₂/δ₂²`.
pub(crate) fn depth(p: &TtrsProblem, x: &DVector<f64>) -> f64 {
    let s1 = -p.ball_slack(x) / (p.delta1 * p.delta1);
    let s2 = -p.ellipsoid_slack(x) / (p.delta2 * p.delta2);
    s1.min(s2)
}

/// A point as deep inside the feasible region as radial shrinking of the
/// witness allows; strictly interior whenever the region has interior.
pub(crate) fn interior_point(p: &TtrsProblem, witness: &DVector<f64>) -> DVector<f64> {
    let mut best = (depth(p, witness), witness.clone());
    let mut t = 0.5;
    for _ in 0..40 {
        let y = witness * (1.0 - t);
        let d = depth(p, &y);
        if d > best.0 {
            best = (d, y);
        }
        t *= 0.5;
    }
    best.1
}

/// Moves `x` toward `inner` (a feasible point) just far enough to satisfy both
/// constraints. Both sets are convex, so bisection on the segment works.
pub(crate) fn restore(p: &TtrsProblem, x: &DVector<f64>, inner: &DVector<f64>) -> DVector<f64> {
    if p.is_feasible(x, 0.0) {
        return x.clone();
    }
    let at = |t: f64| x * (1.0 - t) + inner * t;
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let m = 0.5 * (lo + hi);
        if p.is_feasible(&at(m), 0.0) {
            hi = m;
        } else {
            lo = m;
        }
    }
    at(hi)
}
