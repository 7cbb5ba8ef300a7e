use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("factorization broke down at pivot {index} (|pivot| = {magnitude:e})")]
    SingularPivot { index: usize, magnitude: f64 },

    #[error("eigensolver did not converge after {iterations} iterations (max residual {max_residual:e})")]
    EigenNonConvergence { iterations: usize, max_residual: f64 },

    #[error("computed spectrum violates the lower bound {bound} (got {value})")]
    SpectralBoundViolated { value: f64, bound: f64 },

    #[error("function is not real-valued (max |Im| = {0:e})")]
    NotReal(f64),

    #[error("function does not have zero mean (relative mean {0:e})")]
    NotZeroMean(f64),

    #[error("direction is not tangent to the mass sphere (relative ∫Re φ = {0:e})")]
    NotTangent(f64),

    #[error("zero function")]
    ZeroFunction,

    #[error(
        "mass {mass} exceeds the critical mass {critical} at p = 6: \
         the energy is unbounded below and no ground state exists"
    )]
    SupercriticalMass { mass: f64, critical: f64 },

    #[error("no ground-state run converged ({0} starts)")]
    NoConvergedStart(usize),

    #[error("constancy does not change sign on the mass bracket [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("no sign change of the tangent Hessian found near mass {0}")]
    NoBifurcationNearby(f64),

    #[error("crossing eigenvalue is degenerate (gap {0:e}); branch switching needs a simple eigenvalue")]
    DegenerateCrossing(f64),

    #[error("Newton iteration diverged: {0}")]
    NewtonDivergence(String),

    #[error("energy could not be decreased: backtracking exhausted at step {0:e}")]
    BacktrackingExhausted(f64),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}
