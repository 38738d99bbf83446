//! Fixed benchmark instances shared by the criterion targets.

use ttrs_core::gen::{generate, GenSpec, ProblemClass};
use ttrs_core::TtrsProblem;

/// Dimensions swept by the benchmarks.
pub const SIZES: [usize; 3] = [10, 50, 100];

/// Deterministic instance of the given class.
pub fn instance(class: ProblemClass, n: usize) -> TtrsProblem {
    generate(&GenSpec::new(class, n, 17))
        .expect("benchmark instance generates")
        .problem
}
