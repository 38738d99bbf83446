use nalgebra::DVector;

use super::feasibility::check_feasibility;
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::problem::TtrsProblem;
use crate::trs::{min_over_optimal_set, solve_trs, TrsConfig, TrsProblem};

/// Penalty weights are doubled at most this many times.
pub const MAX_DOUBLINGS: u32 = 20;

/// Which penalized subproblem produced the starting point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StartOrigin {
    /// Ball constraint kept, ellipsoid penalized with the given weight.
    BallPenalized(f64),
    /// Ellipsoid kept, ball penalized with the given weight.
    EllipsoidPenalized(f64),
    /// Neither penalty schedule reached feasibility.
    Witness,
}

#[derive(Debug, Clone)]
pub struct StartPoint {
    pub x: DVector<f64>,
    pub origin: StartOrigin,
}

/// Feasible starting point from the two penalized relaxations
///
/// ```text
/// min ½xᵀAx + aᵀx + β₁((x−c)ᵀB(x−c) − δ₂²)   s.t. ‖x‖² ≤ δ₁²
/// min ½xᵀAx + aᵀx + β₂(‖x‖² − δ₁²)           s.t. (x−c)ᵀB(x−c) ≤ δ₂²
/// ```
///
/// Each weight starts at the given value (zero is allowed) and is doubled
/// until the minimizer is feasible for both constraints; the feasible one
/// with the smaller objective is returned.
pub fn starting_point(p: &TtrsProblem, beta1: f64, beta2: f64) -> Result<DVector<f64>> {
    Ok(starting_point_detailed(p, beta1, beta2, &TrsConfig::default())?.x)
}

pub fn starting_point_detailed(
    p: &TtrsProblem,
    beta1: f64,
    beta2: f64,
    cfg: &TrsConfig,
) -> Result<StartPoint> {
    if !(beta1 >= 0.0 && beta2 >= 0.0) {
        return Err(Error::Config(format!(
            "penalty weights must be nonnegative, got {beta1}, {beta2}"
        )));
    }
    let n = p.dim();
    let bc = p.shape.mul_vec(&p.center);
    let identity = SymMatrix::identity(n);
    let origin = DVector::zeros(n);
    let ball_side = |beta: f64| -> Result<DVector<f64>> {
        let trs = TrsProblem {
            hessian: p.hessian.add_scaled(&p.shape, 2.0 * beta),
            linear: &p.linear - &bc * (2.0 * beta),
            shape: identity.clone(),
            center: origin.clone(),
            radius: p.delta1,
        };
        penalized_minimizer(p, &trs, &p.shape, &p.center, cfg)
    };
    let ellipsoid_side = |beta: f64| -> Result<DVector<f64>> {
        let trs = TrsProblem {
            hessian: p.hessian.shifted(2.0 * beta),
            ..p.ellipsoid_trs()
        };
        penalized_minimizer(p, &trs, &identity, &origin, cfg)
    };
    let first = search(p, beta1, ball_side)?;
    let second = search(p, beta2, ellipsoid_side)?;
    let pick = match (first, second) {
        (Some((x1, b1)), Some((x2, b2))) => {
            if p.objective(&x2) < p.objective(&x1) {
                StartPoint {
                    x: x2,
                    origin: StartOrigin::EllipsoidPenalized(b2),
                }
            } else {
                StartPoint {
                    x: x1,
                    origin: StartOrigin::BallPenalized(b1),
                }
            }
        }
        (Some((x, b)), None) => StartPoint {
            x,
            origin: StartOrigin::BallPenalized(b),
        },
        (None, Some((x, b))) => StartPoint {
            x,
            origin: StartOrigin::EllipsoidPenalized(b),
        },
        (None, None) => {
            let f = check_feasibility(p)?;
            let x = f
                .witness
                .ok_or_else(|| Error::InvalidProblem("feasible region is empty".into()))?;
            StartPoint {
                x,
                origin: StartOrigin::Witness,
            }
        }
    };
    Ok(pick)
}

/// Global minimizer of one penalized relaxation. In the hard case the
/// optimal set is not a single point, and the member closest to the other
/// constraint (in its own metric) is preferred when it is feasible.
fn penalized_minimizer(
    p: &TtrsProblem,
    trs: &TrsProblem,
    other_shape: &SymMatrix,
    other_center: &DVector<f64>,
    cfg: &TrsConfig,
) -> Result<DVector<f64>> {
    let sol = solve_trs(trs, cfg)?;
    if sol.hard_case && !p.is_feasible(&sol.x, super::POOL_TOL) {
        if let (Some(q), Some(v)) = (&sol.q, &sol.v) {
            match min_over_optimal_set(q, v, trs, other_shape, other_center, sol.mu > 0.0, cfg) {
                Ok(x) if p.is_feasible(&x, super::POOL_TOL) => return Ok(x),
                Ok(_) | Err(Error::InfeasibleReduction(_)) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Ok(sol.x)
}

fn search(
    p: &TtrsProblem,
    beta0: f64,
    solve: impl Fn(f64) -> Result<DVector<f64>>,
) -> Result<Option<(DVector<f64>, f64)>> {
    let cap = beta0.max(1.0) * f64::from(1u32 << MAX_DOUBLINGS);
    let mut beta = beta0;
    loop {
        let x = solve(beta)?;
        if p.is_feasible(&x, super::POOL_TOL) {
            return Ok(Some((x, beta)));
        }
        beta = if beta == 0.0 { 1.0 } else { 2.0 * beta };
        if beta > cap {
            return Ok(None);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unpenalized_optimum_already_feasible() {
        // the ball optimum (−1, 0) lies inside the wide ellipsoid
        let p = TtrsProblem::new(
            SymMatrix::from_diagonal(&[-1.0, 1.0]),
            DVector::from_column_slice(&[0.5, 0.0]),
            SymMatrix::from_diagonal(&[0.25, 0.25]),
            DVector::zeros(2),
            1.0,
            1.0,
        )
        .unwrap();
        let s = starting_point_detailed(&p, 0.0, 0.0, &TrsConfig::default()).unwrap();
        let ball = solve_trs(&p.ball_trs(), &TrsConfig::default()).unwrap().x;
        assert!(p.is_feasible(&ball, 1e-8));
        assert_eq!(s.origin, StartOrigin::BallPenalized(0.0));
        assert!((s.x - ball).norm() < 1e-14);
    }

    #[test]
    fn random_planar_instances_give_feasible_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut done = 0;
        while done < 100 {
            let m = nalgebra::DMatrix::from_fn(2, 2, |_, _| rng.random_range(-3.0..3.0));
            let a = SymMatrix::symmetrized(&m + m.transpose());
            let g = nalgebra::DMatrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0));
            let b = SymMatrix::symmetrized(&g * g.transpose()).shifted(0.1);
            let lin = DVector::from_fn(2, |_, _| rng.random_range(-2.0..2.0));
            let c = DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
            let p = TtrsProblem::new(a, lin, b, c, 1.0, rng.random_range(0.3..1.5)).unwrap();
            if !check_feasibility(&p).unwrap().feasible {
                continue;
            }
            let x = starting_point(&p, 1.0, 1.0).unwrap();
            assert!(p.is_feasible(&x, 1e-8));
            done += 1;
        }
    }
}
