//! Serializable views of solver output.

use nalgebra::DVector;
use serde::Serialize;
use ttrs_core::gen::{Annotations, GenSpec};
use ttrs_core::hybrid::{AdmmExit, Candidate, TraceEntry};
use ttrs_core::{KktPoint, SolveReport};

fn values(x: &DVector<f64>) -> Vec<f64> {
    x.as_slice().to_vec()
}

#[derive(Debug, Serialize)]
pub struct KktView {
    pub gamma: f64,
    pub mu: f64,
    pub stationarity_residual: f64,
    pub ball_complementarity: f64,
    pub ellipsoid_complementarity: f64,
    pub curvature_class: &'static str,
    pub min_eigenvalue: f64,
    pub negative_eigenvalues: usize,
    pub ball_active: bool,
    pub ellipsoid_active: bool,
}

impl From<&KktPoint> for KktView {
    fn from(k: &KktPoint) -> Self {
        KktView {
            gamma: k.gamma,
            mu: k.mu,
            stationarity_residual: k.stationarity_residual,
            ball_complementarity: k.comp_residuals.0,
            ellipsoid_complementarity: k.comp_residuals.1,
            curvature_class: k.curvature_class.as_str(),
            min_eigenvalue: k.min_eigenvalue,
            negative_eigenvalues: k.negative_eigenvalues,
            ball_active: k.ball_active,
            ellipsoid_active: k.ellipsoid_active,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct CandidateView {
    pub source: &'static str,
    pub feasible: bool,
    pub objective: f64,
    pub x: Vec<f64>,
}

impl From<&Candidate> for CandidateView {
    fn from(c: &Candidate) -> Self {
        CandidateView {
            source: c.source.as_str(),
            feasible: c.feasible,
            objective: c.objective,
            x: values(&c.x),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct TraceView {
    pub run: usize,
    pub k: usize,
    pub primal_residual: f64,
    pub step: f64,
    pub objective: f64,
    pub lagrangian: f64,
    pub descent_margin: f64,
}

impl From<&TraceEntry> for TraceView {
    fn from(t: &TraceEntry) -> Self {
        TraceView {
            run: t.run,
            k: t.k,
            primal_residual: t.primal_residual,
            step: t.step,
            objective: t.objective,
            lagrangian: t.lagrangian,
            descent_margin: t.descent_margin,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct LngmView {
    pub ball: String,
    pub ellipsoid: String,
    pub ball_feasible: bool,
    pub ellipsoid_feasible: bool,
}

#[derive(Debug, Serialize)]
pub struct TimingsView {
    pub feasibility: f64,
    pub screening: f64,
    pub lngm: f64,
    pub admm: f64,
    pub total: f64,
}

#[derive(Debug, Serialize)]
pub struct ReportView {
    pub status: &'static str,
    pub objective: Option<f64>,
    pub x: Option<Vec<f64>>,
    pub source: Option<&'static str>,
    pub optimum_source: Option<&'static str>,
    pub kkt: Option<KktView>,
    pub v_ch: f64,
    pub lngm: Option<LngmView>,
    pub start: Option<Vec<f64>>,
    pub admm_iterations: usize,
    pub admm_exit: Option<&'static str>,
    pub rho: f64,
    pub tau: f64,
    pub timings: TimingsView,
    pub pool: Vec<CandidateView>,
    pub trace: Vec<TraceView>,
}

pub fn exit_name(e: AdmmExit) -> &'static str {
    match e {
        AdmmExit::Converged => "converged",
        AdmmExit::MaxIter => "max_iter",
        AdmmExit::Stagnated => "stagnated",
    }
}

impl From<&SolveReport> for ReportView {
    fn from(r: &SolveReport) -> Self {
        let best = r.best.as_ref();
        ReportView {
            status: r.status.as_str(),
            objective: best.map(|b| b.objective),
            x: best.map(|b| values(&b.x)),
            source: best.map(|b| b.source.as_str()),
            optimum_source: r.optimum_source().map(|s| s.as_str()),
            kkt: best.map(|b| KktView::from(&b.kkt)),
            v_ch: r.v_ch,
            lngm: r.lngm.as_ref().map(|l| LngmView {
                ball: format!("{:?}", l.ball),
                ellipsoid: format!("{:?}", l.ellipsoid),
                ball_feasible: l.ball_feasible,
                ellipsoid_feasible: l.ellipsoid_feasible,
            }),
            start: r.start.as_ref().map(values),
            admm_iterations: r.admm_iterations,
            admm_exit: r.admm_exit.map(exit_name),
            rho: r.rho,
            tau: r.tau,
            timings: TimingsView {
                feasibility: r.timings.feasibility,
                screening: r.timings.screening,
                lngm: r.timings.lngm,
                admm: r.timings.admm,
                total: r.timings.total,
            },
            pool: r.pool.entries.iter().map(CandidateView::from).collect(),
            trace: r.trace.iter().map(TraceView::from).collect(),
        }
    }
}

/// Ground truth written next to a generated problem file.
#[derive(Debug, Serialize)]
pub struct Sidecar {
    pub class: &'static str,
    pub n: usize,
    pub density: f64,
    pub seed: u64,
    pub lngm: Option<Vec<f64>>,
    pub lngm_multiplier: Option<f64>,
    pub lngm_side: Option<&'static str>,
    pub trs_global: Option<Vec<f64>>,
}

impl Sidecar {
    pub fn new(spec: &GenSpec, a: &Annotations) -> Self {
        Sidecar {
            class: spec.class.as_str(),
            n: spec.n,
            density: spec.density,
            seed: spec.seed,
            lngm: a.lngm.as_ref().map(values),
            lngm_multiplier: a.lngm_multiplier,
            lngm_side: a.lngm_side.map(|s| s.as_str()),
            trs_global: a.trs_global.as_ref().map(values),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct OracleView {
    pub objective: f64,
    pub x: Vec<f64>,
}

impl OracleView {
    pub fn new(x: &DVector<f64>, objective: f64) -> Self {
        OracleView {
            objective,
            x: values(x),
        }
    }
}
