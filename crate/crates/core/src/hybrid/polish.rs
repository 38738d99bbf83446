//! Active-set Newton refinement of an approximate KKT point.
//!
//! ADMM stops once `‖x − z‖ ≤ tol`, which leaves `x` slightly outside the
//! ball and the multipliers only approximately determined. For each guess of
//! the active set this solves the square system
//!
//! ```text
//! (A + γI + μB)x + a − μBc = 0,   ‖x‖² = δ₁² (if active),   (x−c)ᵀB(x−c) = δ₂² (if active)
//! ```
//!
//! by Newton's method from the ADMM point and keeps the best feasible result
//! with nonnegative multipliers that stays close to the start or improves
//! on it.

use nalgebra::{DMatrix, DVector};

use super::certify::recover_multipliers;
use crate::problem::TtrsProblem;

/// A polished point may move at most this far, relative to `1 + ‖x₀‖`.
pub const MAX_MOVE: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct Polished {
    pub x: DVector<f64>,
    pub gamma: f64,
    pub mu: f64,
}

pub fn polish(p: &TtrsProblem, x0: &DVector<f64>) -> Option<Polished> {
    let (g0, m0) = recover_multipliers(p, x0);
    let mut best: Option<(f64, Polished)> = None;
    for (ball, ell) in [(true, true), (true, false), (false, true), (false, false)] {
        let Some(cand) = newton(p, x0, ball, ell, g0, m0) else {
            continue;
        };
        if !accept(p, x0, &cand) {
            continue;
        }
        let f = p.objective(&cand.x);
        if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
            best = Some((f, cand));
        }
    }
    best.map(|(_, c)| c)
}

/// A far move is still taken when it does not raise the objective: Newton
/// then only sped up a slowly converging run.
fn accept(p: &TtrsProblem, x0: &DVector<f64>, c: &Polished) -> bool {
    let f0 = p.objective(x0);
    let near = (&c.x - x0).norm() <= MAX_MOVE * (1.0 + x0.norm());
    let better = p.objective(&c.x) <= f0 + 1e-12 * (1.0 + f0.abs());
    c.gamma >= 0.0 && c.mu >= 0.0 && p.is_feasible(&c.x, 1e-12) && (near || better)
}

fn newton(
    p: &TtrsProblem,
    x0: &DVector<f64>,
    ball: bool,
    ell: bool,
    gamma0: f64,
    mu0: f64,
) -> Option<Polished> {
    let n = p.dim();
    let m = n + usize::from(ball) + usize::from(ell);
    let mut x = x0.clone();
    let mut gamma = if ball { gamma0 } else { 0.0 };
    let mut mu = if ell { mu0 } else { 0.0 };
    let d1 = p.delta1 * p.delta1;
    let d2 = p.delta2 * p.delta2;
    let scale = 1.0 + p.linear.norm() + p.hessian.frobenius_norm() * (1.0 + x0.norm());

    let residual = |x: &DVector<f64>, gamma: f64, mu: f64| -> DVector<f64> {
        let bd = p.shape.mul_vec(&(x - &p.center));
        let mut r = DVector::zeros(m);
        r.rows_mut(0, n)
            .copy_from(&(p.gradient(x) + x * gamma + &bd * mu));
        let mut i = n;
        if ball {
            r[i] = 0.5 * (x.norm_squared() - d1);
            i += 1;
        }
        if ell {
            r[i] = 0.5 * (x - &p.center).dot(&bd) - 0.5 * d2;
        }
        r
    };

    let mut r = residual(&x, gamma, mu);
    for _ in 0..30 {
        if r.norm() <= 1e-15 * scale {
            break;
        }
        let bd = p.shape.mul_vec(&(&x - &p.center));
        let mut jac = DMatrix::zeros(m, m);
        let h = p.hessian.add_scaled(&p.shape, mu).shifted(gamma);
        jac.view_mut((0, 0), (n, n)).copy_from(h.matrix());
        let mut i = n;
        if ball {
            jac.view_mut((0, i), (n, 1)).copy_from(&x);
            jac.view_mut((i, 0), (1, n)).copy_from(&x.transpose());
            i += 1;
        }
        if ell {
            jac.view_mut((0, i), (n, 1)).copy_from(&bd);
            jac.view_mut((i, 0), (1, n)).copy_from(&bd.transpose());
        }
        let step = jac.lu().solve(&(-&r))?;
        if step.iter().any(|v| !v.is_finite()) {
            return None;
        }
        x += step.rows(0, n);
        let mut i = n;
        if ball {
            gamma += step[i];
            i += 1;
        }
        if ell {
            mu += step[i];
        }
        let r_new = residual(&x, gamma, mu);
        let tiny = step.rows(0, n).norm() <= 1e-15 * (1.0 + x.norm());
        r = r_new;
        if tiny {
            break;
        }
    }
    if r.norm() > 1e-9 * scale {
        return None;
    }
    // tiny negative multipliers are rounding
    let clamp = |v: f64| {
        if v < 0.0 && v > -1e-12 * scale {
            0.0
        } else {
            v
        }
    };
    Some(Polished {
        x,
        gamma: clamp(gamma),
        mu: clamp(mu),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::worked_examples;

    #[test]
    fn recovers_the_first_example_optimum_from_a_perturbed_point() {
        let ex = &worked_examples()[0];
        let p = &ex.problem;
        let x0 = &ex.optima[0] + DVector::from_column_slice(&[1e-5, -2e-5]);
        let c = polish(p, &x0).unwrap();
        assert!((&c.x - &ex.optima[0]).norm() < 1e-13);
        assert!((p.objective(&c.x) + 4.0).abs() < 1e-13);
        assert!(c.gamma >= 0.0 && c.mu >= 0.0);
    }

    #[test]
    fn refuses_far_moves() {
        let ex = &worked_examples()[0];
        let x0 = DVector::from_column_slice(&[0.0, 0.0]);
        assert!(polish(&ex.problem, &x0).is_none());
    }
}
