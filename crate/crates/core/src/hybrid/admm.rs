//! ADMM on the splitting `x = z` with `x` carrying the ellipsoid and `z` the
//! ball:
//!
//! ```text
//! L(x, z, λ) = ½xᵀAx + aᵀx + λᵀ(x − z) + ρ/2 ‖x − z‖²
//! ```
//!
//! Each sweep minimizes `L` over `z` in the ball (a projection), then over `x`
//! in the ellipsoid (a TRS with the fixed Hessian `A + ρI`), then takes the
//! damped dual step `λ ← λ + τρ(x − z)`.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::MetricFactor;
use crate::problem::TtrsProblem;
use crate::trs::{TrsConfig, TrsKernel};

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub x: DVector<f64>,
    pub z: DVector<f64>,
    pub lambda: DVector<f64>,
    pub rho: f64,
    pub tau: f64,
    pub k: usize,
    /// `‖x − z‖`
    pub primal_residual: f64,
}

impl AdmmState {
    /// `z₀` is `x₀` projected onto the ball.
    pub fn new(
        p: &TtrsProblem,
        x0: DVector<f64>,
        lambda0: DVector<f64>,
        rho: f64,
        tau: f64,
    ) -> Self {
        let z = project_ball(&x0, p.delta1);
        let primal_residual = (&x0 - &z).norm();
        AdmmState {
            x: x0,
            z,
            lambda: lambda0,
            rho,
            tau,
            k: 0,
            primal_residual,
        }
    }
}

pub fn augmented_lagrangian(p: &TtrsProblem, s: &AdmmState) -> f64 {
    let d = &s.x - &s.z;
    p.objective(&s.x) + s.lambda.dot(&d) + 0.5 * s.rho * d.norm_squared()
}

fn project_ball(v: &DVector<f64>, radius: f64) -> DVector<f64> {
    let n = v.norm();
    if n <= radius {
        v.clone()
    } else {
        v * (radius / n)
    }
}

/// Holds the factorization of the x-subproblem, which is the same at every
/// sweep, so that a sweep costs `O(n²)`.
#[derive(Debug, Clone)]
pub struct AdmmSolver {
    kernel: TrsKernel,
    rho: f64,
    tau: f64,
}

impl AdmmSolver {
    /// Requires `ρ > −λ₁(A)` so that `A + ρI` is positive definite, and `τ ∈ (0, 1)`.
    pub fn new(p: &TtrsProblem, lambda_min: f64, rho: f64, tau: f64) -> Result<Self> {
        Self::with_factor(p, MetricFactor::new(&p.shape)?, lambda_min, rho, tau)
    }

    pub fn with_factor(
        p: &TtrsProblem,
        factor: MetricFactor,
        lambda_min: f64,
        rho: f64,
        tau: f64,
    ) -> Result<Self> {
        if !(rho > 0.0 && rho > -lambda_min) {
            return Err(Error::Config(format!(
                "rho = {rho} must exceed max(0, -lambda_min(A)) = {}",
                (-lambda_min).max(0.0)
            )));
        }
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::Config(format!("tau must lie in (0, 1), got {tau}")));
        }
        let cfg = TrsConfig {
            root_tol: 1e-15,
            ..TrsConfig::default()
        };
        let kernel = TrsKernel::with_factor(
            &p.hessian.shifted(rho),
            &p.shape,
            factor,
            &p.center,
            p.delta2,
            cfg,
        )?;
        Ok(AdmmSolver { kernel, rho, tau })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn step(&self, p: &TtrsProblem, s: &AdmmState) -> Result<AdmmState> {
        let rho = self.rho;
        let z = project_ball(&(&s.x + &s.lambda / rho), p.delta1);
        // min ½xᵀ(A+ρI)x + (a + λ − ρz)ᵀx over the ellipsoid
        let lin = &p.linear + &s.lambda - &z * rho;
        if lin.iter().any(|v| !v.is_finite()) {
            return Err(Error::Admm {
                iteration: s.k + 1,
                source: Box::new(Error::Solver("non-finite iterate".into())),
            });
        }
        let x = self.kernel.solve(&lin).x;
        let d = &x - &z;
        let lambda = &s.lambda + &d * (self.tau * rho);
        Ok(AdmmState {
            primal_residual: d.norm(),
            x,
            z,
            lambda,
            rho,
            tau: self.tau,
            k: s.k + 1,
        })
    }
}

/// One sweep, factorizing the x-subproblem from scratch.
pub fn admm_step(state: &AdmmState, p: &TtrsProblem) -> Result<AdmmState> {
    let lambda_min = crate::linalg::spectral(&p.hessian)?.min();
    AdmmSolver::new(p, lambda_min, state.rho, state.tau)?.step(p, state)
}

/// `(L_k − L_{k+1}) − [((λ₁+ρ)/2)‖Δx‖² − ‖Δλ‖²/(τρ)]`; nonnegative up to rounding.
pub fn descent_margin(p: &TtrsProblem, lambda_min: f64, prev: &AdmmState, next: &AdmmState) -> f64 {
    let drop = augmented_lagrangian(p, prev) - augmented_lagrangian(p, next);
    let dx = (&next.x - &prev.x).norm_squared();
    let dl = (&next.lambda - &prev.lambda).norm_squared();
    drop - (0.5 * (lambda_min + next.rho) * dx - dl / (next.tau * next.rho))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    /// Index of the ADMM run (one per starting point).
    pub run: usize,
    pub k: usize,
    pub primal_residual: f64,
    pub step: f64,
    pub objective: f64,
    pub lagrangian: f64,
    pub descent_margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdmmExit {
    Converged,
    MaxIter,
    Stagnated,
}

#[derive(Debug, Clone)]
pub struct AdmmRun {
    pub state: AdmmState,
    pub exit: AdmmExit,
    pub trace: Vec<TraceEntry>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct RunLimits {
    pub tol: f64,
    pub max_iter: usize,
    pub stagnation_window: usize,
}

pub(crate) fn run(
    solver: &AdmmSolver,
    p: &TtrsProblem,
    lambda_min: f64,
    init: AdmmState,
    limits: RunLimits,
    run_index: usize,
) -> Result<AdmmRun> {
    let mut state = init;
    let mut trace = Vec::new();
    let mut history = Vec::with_capacity(limits.max_iter);
    let mut exit = AdmmExit::MaxIter;
    for _ in 0..limits.max_iter {
        let next = solver.step(p, &state)?;
        let step = (&next.x - &state.x).norm();
        trace.push(TraceEntry {
            run: run_index,
            k: next.k,
            primal_residual: next.primal_residual,
            step,
            objective: p.objective(&next.x),
            lagrangian: augmented_lagrangian(p, &next),
            descent_margin: descent_margin(p, lambda_min, &state, &next),
        });
        history.push(next.primal_residual);
        state = next;
        if state.primal_residual <= limits.tol && step <= limits.tol {
            exit = AdmmExit::Converged;
            break;
        }
        let w = limits.stagnation_window;
        // the residual oscillates, so compare the best value of the latest
        // window against the best value seen before it
        if w > 0 && history.len() >= 2 * w && history.len().is_multiple_of(w) {
            let (before, latest) = history.split_at(history.len() - w);
            let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
            if min(latest) > min(before) * (1.0 - 1e-3) {
                exit = AdmmExit::Stagnated;
                break;
            }
        }
    }
    Ok(AdmmRun { state, exit, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SymMatrix;
    use crate::trs::{solve_trs, TrsProblem};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn vec(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn interior_fixed_point() {
        // A x̄ + a = 0 with x̄ strictly inside both constraints and λ = 0
        let a = SymMatrix::from_row_slice(2, &[2.0, 0.5, 0.5, 1.0]).unwrap();
        let xbar = vec(&[0.2, -0.1]);
        let lin = -a.mul_vec(&xbar);
        let p = TtrsProblem::new(
            a,
            lin,
            SymMatrix::from_diagonal(&[2.0, 1.0]),
            vec(&[0.1, 0.0]),
            1.0,
            1.0,
        )
        .unwrap();
        let s = AdmmState::new(&p, xbar.clone(), DVector::zeros(2), 3.0, 0.9);
        let next = admm_step(&s, &p).unwrap();
        assert!((&next.x - &xbar).norm() < 1e-10);
        assert!((&next.z - &xbar).norm() < 1e-10);
        assert!(next.lambda.norm() < 1e-10);
        assert_eq!(next.k, 1);
    }

    #[test]
    fn z_update_matches_generic_trs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n = 4;
            let x = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
            let lambda = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
            let rho = rng.random_range(0.5..5.0);
            let delta1 = rng.random_range(0.2..2.0);
            let closed = project_ball(&(&x + &lambda / rho), delta1);
            // min −λᵀz + ρ/2‖x − z‖² = ½ρ zᵀz − (λ + ρx)ᵀz + const
            let trs = TrsProblem::ball(
                SymMatrix::identity(n).scaled(rho),
                -(&lambda + &x * rho),
                delta1,
            )
            .unwrap();
            let generic = solve_trs(&trs, &TrsConfig::default()).unwrap().x;
            assert!((closed - generic).norm() < 1e-9);
        }
    }

    #[test]
    fn iterates_stay_feasible_and_descend() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let n = 6;
            let m = nalgebra::DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let a = SymMatrix::symmetrized(&m + m.transpose());
            let g = nalgebra::DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let b = SymMatrix::symmetrized(&g * g.transpose()).shifted(0.1);
            let lin = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let c = DVector::from_fn(n, |_, _| rng.random_range(-0.2..0.2));
            let p = TtrsProblem::new(a.clone(), lin, b, c.clone(), 1.0, 1.5).unwrap();
            let lmin = crate::linalg::spectral(&a).unwrap().min();
            let rho = 4.0 * lmin.abs() + 1.0;
            let solver = AdmmSolver::new(&p, lmin, rho, 0.9).unwrap();
            let mut s = AdmmState::new(&p, c.clone(), &c * 2.0, rho, 0.9);
            for _ in 0..200 {
                let next = solver.step(&p, &s).unwrap();
                assert!(next.z.norm_squared() <= 1.0 + 1e-10);
                assert!(p.ellipsoid_slack(&next.x) <= 1e-10);
                assert!(descent_margin(&p, lmin, &s, &next) >= -1e-8);
                s = next;
            }
        }
    }

    #[test]
    fn rejects_small_penalty() {
        let p = TtrsProblem::new(
            SymMatrix::from_diagonal(&[-3.0, 1.0]),
            DVector::zeros(2),
            SymMatrix::identity(2),
            DVector::zeros(2),
            1.0,
            1.0,
        )
        .unwrap();
        assert!(matches!(
            AdmmSolver::new(&p, -3.0, 2.0, 0.9),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            AdmmSolver::new(&p, -3.0, 4.0, 1.0),
            Err(Error::Config(_))
        ));
        assert!(AdmmSolver::new(&p, -3.0, 4.0, 0.9).is_ok());
    }
}
