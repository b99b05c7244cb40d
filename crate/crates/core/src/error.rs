use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Location in (z, w, theta) space where a sampled bound failed.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Witness {
    pub z: Complex64,
    pub w: Complex64,
    pub theta: f64,
    pub z0: Option<Complex64>,
    pub value: f64,
    pub bound: f64,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at byte {offset}: expected one of {expected:?}")]
    Syntax { offset: usize, expected: Vec<String> },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("evaluation error: {0}")]
    Eval(String),
    #[error("ellipticity violated at z = {z}, w = {w}: |mu| + |nu| = {sum}")]
    EllipticityViolation { z: Complex64, w: Complex64, sum: f64 },
    #[error("unknown catalog entry `{0}`")]
    UnknownCatalogEntry(String),
    #[error("parameter out of range: {0}")]
    ParamOutOfRange(String),
    #[error("tangential dilatation undefined at z = z0")]
    DegenerateBase,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("support radius {radius} too large for box half-width {half_width}")]
    SupportTooLarge { radius: f64, half_width: f64 },
    #[error("coefficients not contractive: k = {0} >= 1")]
    NotContractive(f64),
    #[error("no convergence after {steps} iterations (last relative update {last_update:e})")]
    MaxIterations { steps: usize, last_update: f64 },
    #[error("degenerate normalization: |f(1) - f(0)| = {0:e}")]
    DegenerateNormalization(f64),
    #[error("residual {residual:e} above tolerance {tol:e}")]
    ResidualAboveTolerance { residual: f64, tol: f64 },
    #[error("outer iteration diverged at rung {rung} after {steps} steps")]
    OuterDivergence { rung: u32, steps: usize },
    #[error("compact set is empty for margin {0}")]
    EmptyCompact(f64),
    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),
    #[error("bound violated: {kind} = {} > {} at z = {}", .witness.value, .witness.bound, .witness.z)]
    BoundViolation { kind: String, witness: Witness },
    #[error("map is not invertible: {0}")]
    NotInvertible(String),
    #[error("point {0} lies outside the image")]
    OutOfImage(Complex64),
    #[error("malformed input: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
