use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::trs::TrsProblem;

/// `min ½xᵀAx + aᵀx  s.t. ‖x‖² ≤ δ₁², (x−c)ᵀB(x−c) ≤ δ₂²`.
#[derive(Debug, Clone, PartialEq)]
pub struct TtrsProblem {
    pub hessian: SymMatrix,
    pub linear: DVector<f64>,
    pub shape: SymMatrix,
    pub center: DVector<f64>,
    pub delta1: f64,
    pub delta2: f64,
}

impl TtrsProblem {
    /// Checks dimensions and radii. Positive definiteness of `B` is checked
    /// lazily by the first factorization.
    pub fn new(
        hessian: SymMatrix,
        linear: DVector<f64>,
        shape: SymMatrix,
        center: DVector<f64>,
        delta1: f64,
        delta2: f64,
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
        for (name, d) in [("delta1", delta1), ("delta2", delta2)] {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::InvalidProblem(format!(
                    "{name} must be positive, got {d}"
                )));
            }
        }
        if linear.iter().chain(center.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidProblem("non-finite vector entry".into()));
        }
        Ok(TtrsProblem {
            hessian,
            linear,
            shape,
            center,
            delta1,
            delta2,
        })
    }

    pub fn dim(&self) -> usize {
        self.hessian.dim()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * self.hessian.quad(x) + self.linear.dot(x)
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.hessian.mul_vec(x) + &self.linear
    }

    /// `‖x‖² − δ₁²`
    pub fn ball_slack(&self, x: &DVector<f64>) -> f64 {
        x.norm_squared() - self.delta1 * self.delta1
    }

    /// `(x−c)ᵀB(x−c) − δ₂²`
    pub fn ellipsoid_slack(&self, x: &DVector<f64>) -> f64 {
        self.shape.quad(&(x - &self.center)) - self.delta2 * self.delta2
    }

    /// Both constraints hold up to a relative tolerance.
    pub fn is_feasible(&self, x: &DVector<f64>, rel_tol: f64) -> bool {
        let d1 = self.delta1 * self.delta1;
        let d2 = self.delta2 * self.delta2;
        self.ball_slack(x) <= rel_tol * d1 && self.ellipsoid_slack(x) <= rel_tol * d2
    }

    /// The relaxation keeping only the ball constraint.
    pub fn ball_trs(&self) -> TrsProblem {
        let n = self.dim();
        TrsProblem {
            hessian: self.hessian.clone(),
            linear: self.linear.clone(),
            shape: SymMatrix::identity(n),
            center: DVector::zeros(n),
            radius: self.delta1,
        }
    }

    /// The relaxation keeping only the ellipsoid constraint.
    pub fn ellipsoid_trs(&self) -> TrsProblem {
        TrsProblem {
            hessian: self.hessian.clone(),
            linear: self.linear.clone(),
            shape: self.shape.clone(),
            center: self.center.clone(),
            radius: self.delta2,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_input() {
        let a = SymMatrix::identity(2);
        let v = DVector::zeros(2);
        assert!(
            TtrsProblem::new(a.clone(), DVector::zeros(3), a.clone(), v.clone(), 1.0, 1.0).is_err()
        );
        assert!(TtrsProblem::new(a.clone(), v.clone(), a.clone(), v.clone(), 0.0, 1.0).is_err());
        assert!(
            TtrsProblem::new(a.clone(), v.clone(), a.clone(), v.clone(), 1.0, f64::NAN).is_err()
        );
        assert!(TtrsProblem::new(a.clone(), v.clone(), a, v, 1.0, 1.0).is_ok());
    }

    #[test]
    fn slacks() {
        let p = TtrsProblem::new(
            SymMatrix::identity(2),
            DVector::zeros(2),
            SymMatrix::from_diagonal(&[4.0, 1.0]),
            DVector::from_column_slice(&[1.0, 0.0]),
            1.0,
            1.0,
        )
        .unwrap();
        let x = DVector::from_column_slice(&[1.0, 0.0]);
        assert_eq!(p.ball_slack(&x), 0.0);
        assert_eq!(p.ellipsoid_slack(&x), -1.0);
        assert!(p.is_feasible(&x, 0.0));
        assert!(!p.is_feasible(&DVector::from_column_slice(&[0.0, 0.0]), 1e-8));
    }
}
