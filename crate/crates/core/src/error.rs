use thiserror::Error;

/// Failures of the dense linear-algebra kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("symmetric eigen-iteration did not converge within {iterations} sweeps")]
    EigenNoConvergence { iterations: usize },
    #[error("right-hand matrix of the pencil is not positive definite")]
    PencilError,
    #[error("basis is rank deficient in the B-inner product")]
    RankError,
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("ADMM iteration {iteration}: {source}")]
    Admm {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("reduced sphere radius is negative ({0:e})")]
    InfeasibleReduction(f64),
    #[error("generator failed: {0}")]
    Gen(String),
    #[error("no grid sample landed in the feasible region")]
    EmptyFeasibleSample,
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
