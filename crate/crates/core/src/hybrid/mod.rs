//! The hybrid driver: feasibility gate, screening of the two relaxations,
//! local non-global minimizers, ADMM refinement, selection and certificate.

mod admm;
mod certify;
mod feasibility;
mod polish;
mod screen;
mod start;

use std::time::Instant;

use nalgebra::DVector;

pub use admm::{
    admm_step, augmented_lagrangian, descent_margin, AdmmExit, AdmmRun, AdmmSolver, AdmmState,
    TraceEntry,
};
pub use certify::{
    certify, recover_multipliers, CurvatureClass, KktPoint, ACTIVE_TOL, NEGATIVE_EIG_TOL,
};
pub use feasibility::{check_feasibility, Feasibility, FEASIBILITY_TOL};
pub use polish::{polish, Polished};
pub use screen::{collect_lngm_candidates, screen_global_candidates, LngmSummary, Relaxations};
pub use start::{starting_point, starting_point_detailed, StartOrigin, StartPoint, MAX_DOUBLINGS};

use crate::error::{Error, Result};
use crate::linalg;
use crate::lngm::LngmConfig;
use crate::problem::TtrsProblem;
use crate::trs::TrsConfig;

/// Relative tolerance of the pool feasibility flag.
pub const POOL_TOL: f64 = 1e-8;

/// Objectives closer than this are ties, broken by [`Source::priority`].
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Source {
    /// Global solution of the ball relaxation.
    GlobalBall,
    /// Global solution of the ellipsoid relaxation.
    GlobalEllipsoid,
    /// Point of the ball relaxation's optimal set (hard case).
    HardAltBall,
    /// Point of the ellipsoid relaxation's optimal set (hard case).
    HardAltEllipsoid,
    /// Local non-global minimizer of the ball relaxation.
    LngmBall,
    /// Local non-global minimizer of the ellipsoid relaxation.
    LngmEllipsoid,
    Admm,
}

impl Source {
    pub fn priority(&self) -> u8 {
        match self {
            Source::GlobalBall | Source::GlobalEllipsoid => 0,
            Source::HardAltBall | Source::HardAltEllipsoid => 1,
            Source::LngmBall | Source::LngmEllipsoid => 2,
            Source::Admm => 3,
        }
    }

    /// A feasible point from this source solves the two-constraint problem.
    pub fn is_certified_global(&self) -> bool {
        self.priority() <= 1
    }

    pub fn is_lngm(&self) -> bool {
        matches!(self, Source::LngmBall | Source::LngmEllipsoid)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Source::GlobalBall => "global_ball",
            Source::GlobalEllipsoid => "global_ellipsoid",
            Source::HardAltBall => "hard_alt_ball",
            Source::HardAltEllipsoid => "hard_alt_ellipsoid",
            Source::LngmBall => "lngm_ball",
            Source::LngmEllipsoid => "lngm_ellipsoid",
            Source::Admm => "admm",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Candidate {
    pub x: DVector<f64>,
    pub source: Source,
    pub feasible: bool,
    pub objective: f64,
    /// Multipliers `(γ, μ)` known from the producing subproblem.
    pub multipliers: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Default)]
pub struct CandidatePool {
    pub entries: Vec<Candidate>,
}

impl CandidatePool {
    pub fn push(
        &mut self,
        p: &TtrsProblem,
        x: DVector<f64>,
        source: Source,
        multipliers: Option<(f64, f64)>,
    ) {
        let feasible = p.is_feasible(&x, POOL_TOL);
        let objective = p.objective(&x);
        self.entries.push(Candidate {
            x,
            source,
            feasible,
            objective,
            multipliers,
        });
    }

    /// Feasible entry with the smallest objective.
    pub fn best(&self) -> Option<&Candidate> {
        self.best_where(|_| true)
    }

    pub fn best_where(&self, keep: impl Fn(&Candidate) -> bool) -> Option<&Candidate> {
        let mut best: Option<&Candidate> = None;
        for c in self.entries.iter().filter(|c| c.feasible && keep(c)) {
            best = match best {
                None => Some(c),
                Some(b) => {
                    let better = c.objective < b.objective - TIE_TOL
                        || (c.objective <= b.objective + TIE_TOL
                            && c.source.priority() < b.source.priority());
                    Some(if better { c } else { b })
                }
            };
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Infeasible,
    GlobalCertified,
    StationaryPoint,
    MaxIter,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Infeasible => "infeasible",
            Status::GlobalCertified => "global_certified",
            Status::StationaryPoint => "stationary_point",
            Status::MaxIter => "max_iter",
        }
    }
}

/// ADMM parameter presets, one per test-problem family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Preset {
    /// Instances with a local non-global minimizer: `ρ = 4|λ₁|+1`, `λ₀ = 2x₀`.
    #[default]
    Class2,
    /// Instances without one: `ρ = 2|λ₁|+1`, `λ₀ = 4x₀`.
    Class3,
    /// Homogeneous instances: `ρ = 4|λ₁|+1`, `λ₀ = 4x₀`.
    Class4,
}

impl Preset {
    pub fn rho_factor(&self) -> f64 {
        match self {
            Preset::Class2 | Preset::Class4 => 4.0,
            Preset::Class3 => 2.0,
        }
    }

    pub fn lambda_scale(&self) -> f64 {
        match self {
            Preset::Class2 => 2.0,
            Preset::Class3 | Preset::Class4 => 4.0,
        }
    }

    pub fn tau(&self) -> f64 {
        0.9
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Preset::Class2 => "class2",
            Preset::Class3 => "class3",
            Preset::Class4 => "class4",
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "class2" => Ok(Preset::Class2),
            "class3" => Ok(Preset::Class3),
            "class4" => Ok(Preset::Class4),
            _ => Err(Error::Config(format!("unknown preset {s:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct HybridConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub preset: Preset,
    /// Overrides the preset penalty.
    pub rho: Option<f64>,
    /// Overrides the preset dual step.
    pub tau: Option<f64>,
    /// Overrides the preset `λ₀ = scale·x₀`.
    pub lambda_scale: Option<f64>,
    /// Additional ADMM starting points; the procedural start always runs too.
    pub starts: Vec<DVector<f64>>,
    /// Initial penalty weights of the starting-point procedure.
    pub beta: (f64, f64),
    /// Stop ADMM when the residual drops by less than 0.1% over this many sweeps (0 disables).
    pub stagnation_window: usize,
    /// Refine ADMM limits with active-set Newton.
    pub polish: bool,
    pub trace: bool,
    pub trs: TrsConfig,
    pub lngm: LngmConfig,
}

impl Default for HybridConfig {
    fn default() -> Self {
        HybridConfig {
            tol: 1e-7,
            max_iter: 1000,
            preset: Preset::default(),
            rho: None,
            tau: None,
            lambda_scale: None,
            starts: Vec::new(),
            beta: (1.0, 1.0),
            stagnation_window: 100,
            polish: true,
            trace: true,
            trs: TrsConfig::default(),
            lngm: LngmConfig::default(),
        }
    }
}

impl HybridConfig {
    pub fn with_preset(preset: Preset) -> Self {
        HybridConfig {
            preset,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("maxiter must be positive".into()));
        }
        if let Some(t) = self.tau {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::Config(format!("tau must lie in (0, 1), got {t}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Best {
    pub x: DVector<f64>,
    pub objective: f64,
    pub source: Source,
    pub kkt: KktPoint,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Timings {
    pub feasibility: f64,
    pub screening: f64,
    pub lngm: f64,
    pub admm: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: Status,
    pub best: Option<Best>,
    pub pool: CandidatePool,
    pub trace: Vec<TraceEntry>,
    pub timings: Timings,
    pub v_ch: f64,
    pub lngm: Option<LngmSummary>,
    /// The procedural starting point.
    pub start: Option<DVector<f64>>,
    pub admm_iterations: usize,
    pub admm_exit: Option<AdmmExit>,
    pub rho: f64,
    pub tau: f64,
}

impl SolveReport {
    /// Source of the optimum, reporting an LNGM whenever a feasible LNGM
    /// candidate coincides with the best point found by another route.
    pub fn optimum_source(&self) -> Option<Source> {
        let best = self.best.as_ref()?;
        if best.source.is_lngm() {
            return Some(best.source);
        }
        let close = |c: &Candidate| (&c.x - &best.x).norm() <= 1e-6 * (1.0 + best.x.norm());
        let lngm = self
            .pool
            .entries
            .iter()
            .filter(|c| c.feasible && c.source.is_lngm() && close(c))
            .map(|c| c.source)
            .min_by_key(|s| s.as_str());
        Some(lngm.unwrap_or(best.source))
    }
}

/// Runs the full hybrid method.
pub fn solve(p: &TtrsProblem, cfg: &HybridConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let t0 = Instant::now();
    let mut timings = Timings::default();
    let mut report = SolveReport {
        status: Status::Infeasible,
        best: None,
        pool: CandidatePool::default(),
        trace: Vec::new(),
        timings,
        v_ch: f64::NAN,
        lngm: None,
        start: None,
        admm_iterations: 0,
        admm_exit: None,
        rho: f64::NAN,
        tau: f64::NAN,
    };

    let feas = check_feasibility(p)?;
    timings.feasibility = t0.elapsed().as_secs_f64();
    report.v_ch = feas.v_ch;
    let Some(witness) = feas.witness else {
        timings.total = t0.elapsed().as_secs_f64();
        report.timings = timings;
        return Ok(report);
    };

    let t = Instant::now();
    let rel = Relaxations::new(p, &cfg.trs)?;
    screen::screen_with(p, &rel, &mut report.pool)?;
    timings.screening = t.elapsed().as_secs_f64();

    if report
        .pool
        .best_where(|c| c.source.is_certified_global())
        .is_some()
    {
        finish(p, cfg, &mut report, false)?;
        timings.total = t0.elapsed().as_secs_f64();
        report.timings = timings;
        return Ok(report);
    }

    let t = Instant::now();
    report.lngm = Some(screen::lngm_with(p, &rel, &cfg.lngm, &mut report.pool));
    timings.lngm = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let lambda_min = linalg::spectral(&p.hessian)?.min();
    let rho = cfg
        .rho
        .unwrap_or(cfg.preset.rho_factor() * lambda_min.abs() + 1.0);
    let tau = cfg.tau.unwrap_or(cfg.preset.tau());
    let scale = cfg.lambda_scale.unwrap_or(cfg.preset.lambda_scale());
    report.rho = rho;
    report.tau = tau;
    let factor = linalg::MetricFactor::new(&p.shape)?;
    let solver = AdmmSolver::with_factor(p, factor, lambda_min, rho, tau)?;

    let start = starting_point_detailed(p, cfg.beta.0, cfg.beta.1, &cfg.trs)?.x;
    report.start = Some(start.clone());
    let mut starts = cfg.starts.clone();
    starts.push(start);

    let inner = feasibility::interior_point(p, &witness);
    let limits = admm::RunLimits {
        tol: cfg.tol,
        max_iter: cfg.max_iter,
        stagnation_window: cfg.stagnation_window,
    };
    let mut any_unconverged = false;
    let mut run_index = 0;
    let mut run_from = |starts: Vec<DVector<f64>>, report: &mut SolveReport| -> Result<()> {
        for x0 in starts {
            if x0.len() != p.dim() {
                return Err(Error::Config(format!(
                    "starting point has dimension {}, expected {}",
                    x0.len(),
                    p.dim()
                )));
            }
            let lambda0 = &x0 * scale;
            let init = AdmmState::new(p, x0, lambda0, rho, tau);
            let run = admm::run(&solver, p, lambda_min, init, limits, run_index)?;
            run_index += 1;
            report.admm_iterations += run.state.k;
            any_unconverged |= run.exit != AdmmExit::Converged;
            report.admm_exit = Some(match (report.admm_exit, run.exit) {
                (Some(AdmmExit::Converged) | None, e) => e,
                (Some(prev), _) => prev,
            });
            if cfg.trace {
                report.trace.extend(run.trace);
            }
            let x = run.state.x;
            let polished = if cfg.polish { polish(p, &x) } else { None };
            match polished {
                Some(c) => report
                    .pool
                    .push(p, c.x, Source::Admm, Some((c.gamma, c.mu))),
                None => {
                    let y = feasibility::restore(p, &x, &inner);
                    report.pool.push(p, y, Source::Admm, None);
                }
            }
        }
        Ok(())
    };
    run_from(starts, &mut report)?;
    if !best_is_global(p, cfg, &report.pool)? {
        // the procedural start may sit in the basin of a local minimizer; the
        // relaxation minimizers pulled back into the feasible set often do not
        let extra = report
            .pool
            .entries
            .iter()
            .filter(|c| !c.feasible && !c.source.is_lngm() && c.source != Source::Admm)
            .map(|c| feasibility::restore(p, &c.x, &inner))
            .collect();
        run_from(extra, &mut report)?;
    }
    timings.admm = t.elapsed().as_secs_f64();

    finish(p, cfg, &mut report, any_unconverged)?;
    timings.total = t0.elapsed().as_secs_f64();
    report.timings = timings;
    Ok(report)
}

fn best_is_global(p: &TtrsProblem, cfg: &HybridConfig, pool: &CandidatePool) -> Result<bool> {
    let Some(best) = pool.best() else {
        return Ok(false);
    };
    let (gamma, mu) = best
        .multipliers
        .unwrap_or_else(|| recover_multipliers(p, &best.x));
    Ok(best.source.is_certified_global() || certify(p, &best.x, gamma, mu)?.is_global(p, cfg.tol))
}

fn finish(
    p: &TtrsProblem,
    cfg: &HybridConfig,
    report: &mut SolveReport,
    unconverged: bool,
) -> Result<()> {
    let Some(best) = report.pool.best().cloned() else {
        return Err(Error::Solver("no feasible candidate".into()));
    };
    let (gamma, mu) = best
        .multipliers
        .unwrap_or_else(|| recover_multipliers(p, &best.x));
    let kkt = certify(p, &best.x, gamma, mu)?;
    report.status = if best.source.is_certified_global() || kkt.is_global(p, cfg.tol) {
        Status::GlobalCertified
    } else if unconverged && best.source == Source::Admm {
        Status::MaxIter
    } else {
        Status::StationaryPoint
    };
    report.best = Some(Best {
        x: best.x,
        objective: best.objective,
        source: best.source,
        kkt,
    });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::worked_examples;
    use crate::linalg::SymMatrix;

    #[test]
    fn disjoint_ellipsoids_are_infeasible() {
        let p = TtrsProblem::new(
            SymMatrix::from_diagonal(&[-1.0, 1.0]),
            DVector::zeros(2),
            SymMatrix::identity(2),
            DVector::from_column_slice(&[3.0, 0.0]),
            1.0,
            1.0,
        )
        .unwrap();
        let r = solve(&p, &HybridConfig::default()).unwrap();
        assert_eq!(r.status, Status::Infeasible);
        assert!(r.pool.entries.is_empty() && r.best.is_none());
        assert!(r.v_ch > 0.0);
    }

    #[test]
    fn first_example() {
        let ex = &worked_examples()[0];
        let r = solve(&ex.problem, &HybridConfig::default()).unwrap();
        let best = r.best.unwrap();
        assert!((best.objective + 4.0).abs() < 1e-6, "{}", best.objective);
        assert!(ex.optima.iter().any(|o| (o - &best.x).amax() < 1e-5));
    }

    #[test]
    fn second_example() {
        let ex = &worked_examples()[1];
        let r = solve(&ex.problem, &HybridConfig::default()).unwrap();
        let best = r.best.unwrap();
        assert!((best.objective - ex.optimal_value).abs() < 1e-4);
        assert!((&best.x - &ex.optima[0]).amax() < 1e-4);
        assert_eq!(best.kkt.curvature_class, CurvatureClass::OneNegative);
    }

    #[test]
    fn tie_breaking_prefers_certified_sources() {
        let p = TtrsProblem::new(
            SymMatrix::identity(1),
            DVector::zeros(1),
            SymMatrix::identity(1),
            DVector::zeros(1),
            1.0,
            1.0,
        )
        .unwrap();
        let mut pool = CandidatePool::default();
        pool.push(&p, DVector::from_element(1, 0.0), Source::Admm, None);
        pool.push(&p, DVector::from_element(1, 1e-9), Source::LngmBall, None);
        pool.push(&p, DVector::from_element(1, 2.0), Source::GlobalBall, None);
        assert_eq!(pool.best().unwrap().source, Source::LngmBall);
        assert!(!pool.entries[2].feasible);
    }

    #[test]
    fn bad_configuration_is_rejected() {
        let ex = &worked_examples()[0];
        let cfg = HybridConfig {
            rho: Some(0.5),
            ..Default::default()
        };
        assert!(matches!(solve(&ex.problem, &cfg), Err(Error::Config(_))));
        let cfg = HybridConfig {
            tau: Some(1.5),
            ..Default::default()
        };
        assert!(matches!(solve(&ex.problem, &cfg), Err(Error::Config(_))));
    }
}
