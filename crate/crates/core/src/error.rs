use thiserror::Error;

/// Errors shared across the crate. Numerical checks that can legitimately
/// fail report through `CheckResult` instead; these are contract violations.
#[derive(Debug, Error)]
pub enum KrfError {
    #[error("positivity loss at node {node} (s = {s:.6}): {quantity} = {value:.6e}")]
    PositivityLoss {
        node: usize,
        s: f64,
        quantity: &'static str,
        value: f64,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("grid too coarse for the 5-point stencil: {0} nodes")]
    StencilUnderflow(usize),

    #[error("argument out of range: {0}")]
    OutOfRange(String),

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("CFL violation: dt = {dt:.6e} exceeds stable limit {dt_max:.6e}")]
    CflViolation { dt: f64, dt_max: f64 },

    #[error("Newton iteration diverged at t = {t:.6e} after {iters} iterations (residual {residual:.6e})")]
    NewtonDivergence { t: f64, iters: u32, residual: f64 },

    #[error("smoothstep derivative bound violated: max slope {max_slope:.6e} > {limit:.6e}")]
    BumpBoundViolation { max_slope: f64, limit: f64 },

    #[error("exhaustion certification failed: {0}")]
    CertificationFailure(String),

    #[error("hypothesis unmet: {0}")]
    HypothesisUnmet(String),

    #[error("insufficient snapshots: {0}")]
    InsufficientSnapshots(String),

    #[error("wrong background for this check: {0}")]
    WrongBackground(String),

    #[error("initial data outside the stated band: {0}")]
    BandUnmet(String),

    #[error("parameter out of range: {0}")]
    RangeError(String),

    #[error("config error at line {line}: {message}")]
    ConfigError { line: usize, message: String },

    #[error("malformed data file {path}: {message}")]
    DataFormat { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, KrfError>;
