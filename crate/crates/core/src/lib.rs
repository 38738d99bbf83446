//! Hybrid solver for the two-trust-region (CDT) subproblem
//!
//! ```text
//! min ½ xᵀAx + aᵀx   s.t.   ‖x‖² ≤ δ₁²,  (x − c)ᵀB(x − c) ≤ δ₂²
//! ```
//!
//! The [`hybrid::solve`] driver checks feasibility, screens the global and
//! local non-global minimizers of the two single-ellipsoid relaxations, then
//! refines with an ADMM splitting whose subproblems are themselves
//! trust-region subproblems, and finally certifies the best candidate.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod format;
pub mod gen;
pub mod hybrid;
pub mod linalg;
pub mod lngm;
pub mod problem;
pub mod trs;

pub use error::{Error, LinalgError, Result};
pub use hybrid::{
    certify, check_feasibility, recover_multipliers, solve, CandidatePool, CurvatureClass,
    HybridConfig, KktPoint, Preset, SolveReport, Source, Status,
};
pub use linalg::{SpectralDecomp, SymMatrix};
pub use lngm::{lngm, LngmReason, LngmResult};
pub use problem::TtrsProblem;
pub use trs::{solve_trs, TrsConfig, TrsProblem, TrsSolution};
