use nalgebra::DVector;

use super::{CandidatePool, Source};
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::lngm::{lngm_in_kernel, LngmConfig, LngmReason};
use crate::problem::TtrsProblem;
use crate::trs::{min_over_optimal_set, TrsConfig, TrsKernel, TrsSolution};

/// Factorizations of the two single-constraint relaxations.
#[derive(Debug, Clone)]
pub struct Relaxations {
    pub ball: TrsKernel,
    pub ellipsoid: TrsKernel,
}

impl Relaxations {
    pub fn new(p: &TtrsProblem, cfg: &TrsConfig) -> Result<Self> {
        Ok(Relaxations {
            ball: TrsKernel::new(&p.ball_trs(), *cfg)?,
            ellipsoid: TrsKernel::new(&p.ellipsoid_trs(), *cfg)?,
        })
    }
}

/// Outcome of the LNGM search on both relaxations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LngmSummary {
    pub ball: LngmReason,
    pub ellipsoid: LngmReason,
    /// The LNGM exists and is feasible for the two-constraint problem.
    pub ball_feasible: bool,
    pub ellipsoid_feasible: bool,
}

/// Solves both relaxations globally and, in the hard case, searches their
/// optimal sets for a point satisfying the other constraint. Every feasible
/// entry is a global solution of the two-constraint problem.
pub fn screen_global_candidates(p: &TtrsProblem, cfg: &TrsConfig) -> Result<CandidatePool> {
    let rel = Relaxations::new(p, cfg)?;
    let mut pool = CandidatePool::default();
    screen_with(p, &rel, &mut pool)?;
    Ok(pool)
}

pub(crate) fn screen_with(
    p: &TtrsProblem,
    rel: &Relaxations,
    pool: &mut CandidatePool,
) -> Result<()> {
    let n = p.dim();
    let ball = rel.ball.solve(&p.linear);
    pool.push(p, ball.x.clone(), Source::GlobalBall, Some((ball.mu, 0.0)));
    let ell = rel.ellipsoid.solve(&p.linear);
    pool.push(
        p,
        ell.x.clone(),
        Source::GlobalEllipsoid,
        Some((0.0, ell.mu)),
    );

    if ball.hard_case && !p.is_feasible(&ball.x, super::POOL_TOL) {
        let own = p.ball_trs();
        let found = alternate(&ball, |q, v| {
            min_over_optimal_set(
                q,
                v,
                &own,
                &p.shape,
                &p.center,
                ball.mu > 0.0,
                rel.ball.config(),
            )
        })?;
        if let Some(x) = found {
            pool.push(p, x, Source::HardAltBall, Some((ball.mu, 0.0)));
        }
    }
    if ell.hard_case && !p.is_feasible(&ell.x, super::POOL_TOL) {
        let own = p.ellipsoid_trs();
        let found = alternate(&ell, |q, v| {
            min_over_optimal_set(
                q,
                v,
                &own,
                &SymMatrix::identity(n),
                &DVector::zeros(n),
                ell.mu > 0.0,
                rel.ellipsoid.config(),
            )
        })?;
        if let Some(x) = found {
            pool.push(p, x, Source::HardAltEllipsoid, Some((0.0, ell.mu)));
        }
    }
    Ok(())
}

fn alternate(
    sol: &TrsSolution,
    search: impl Fn(&DVector<f64>, &nalgebra::DMatrix<f64>) -> Result<DVector<f64>>,
) -> Result<Option<DVector<f64>>> {
    let (Some(q), Some(v)) = (&sol.q, &sol.v) else {
        return Ok(None);
    };
    match search(q, v) {
        Ok(x) => Ok(Some(x)),
        // the eigen-route q sits on the boundary up to rounding
        Err(Error::InfeasibleReduction(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Adds the feasible local non-global minimizers of both relaxations.
pub fn collect_lngm_candidates(
    p: &TtrsProblem,
    cfg: &TrsConfig,
) -> Result<(CandidatePool, LngmSummary)> {
    let rel = Relaxations::new(p, cfg)?;
    let mut pool = CandidatePool::default();
    let summary = lngm_with(p, &rel, &LngmConfig::default(), &mut pool);
    Ok((pool, summary))
}

pub(crate) fn lngm_with(
    p: &TtrsProblem,
    rel: &Relaxations,
    cfg: &LngmConfig,
    pool: &mut CandidatePool,
) -> LngmSummary {
    let ball = lngm_in_kernel(&rel.ball, &p.linear, cfg);
    let ell = lngm_in_kernel(&rel.ellipsoid, &p.linear, cfg);
    let mut ball_feasible = false;
    let mut ellipsoid_feasible = false;
    if let (Some(x), Some(l)) = (&ball.x, ball.lambda_star) {
        if p.is_feasible(x, super::POOL_TOL) {
            ball_feasible = true;
            pool.push(p, x.clone(), Source::LngmBall, Some((l, 0.0)));
        }
    }
    if let (Some(x), Some(l)) = (&ell.x, ell.lambda_star) {
        if p.is_feasible(x, super::POOL_TOL) {
            ellipsoid_feasible = true;
            pool.push(p, x.clone(), Source::LngmEllipsoid, Some((0.0, l)));
        }
    }
    LngmSummary {
        ball: ball.reason,
        ellipsoid: ell.reason,
        ball_feasible,
        ellipsoid_feasible,
    }
}
