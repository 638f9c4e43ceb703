use thiserror::Error;

/// Errors surfaced by the toolkit.
///
/// Conventions that are *not* errors: a Rényi divergence of `+inf` when the
/// absolute-continuity requirement fails (documented on the operation), and
/// `+inf` cells in exponent surfaces (flagged in the output type).
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),
    #[error("marginal mismatch: {0}")]
    MarginalMismatch(String),
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("iteration cap {iters} reached, residual {residual:e}")]
    NonConvergence { iters: usize, residual: f64 },
    #[error("transportation polytope infeasible: {0}")]
    Infeasible(String),
    #[error("singular KKT system: {0}")]
    SingularSystem(String),
    #[error("search space too large: {0}")]
    SearchSpaceTooLarge(String),
    #[error("size guard tripped: {0}")]
    SizeGuard(String),
    #[error("matrix dimension cap exceeded: {0}")]
    CapExceeded(String),
    #[error("nonnegative rank undetermined within budget: bounds [{lower}, {upper}]")]
    Indeterminate { lower: usize, upper: usize },
    #[error("zero matrix has no induced distribution")]
    ZeroMatrix,
    #[error("quadrature failed to reach tolerance: {0}")]
    QuadratureFailure(String),
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("ODE step failure: {0}")]
    OdeStepFailure(String),
    #[error("optimizer constraint violation: residual {0:e}")]
    ConstraintViolation(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
