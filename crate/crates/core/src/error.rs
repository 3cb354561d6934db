use thiserror::Error;

/// Errors raised while building or solving a problem instance.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("profile produced a non-finite or out-of-range value at ({x1}, {x2}): {what}")]
    BadSample { x1: f64, x2: f64, what: String },

    #[error("weight b must be positive, got {value} at ({x1}, {x2})")]
    NonPositiveWeight { x1: f64, x2: f64, value: f64 },

    #[error("root finder failed on bracket [{lo}, {hi}]")]
    RootNotBracketed { lo: f64, hi: f64 },

    #[error("ray never crosses the Nehari manifold for t <= {t_max}")]
    NoNehariRoot { t_max: f64 },

    #[error("initial guess center too close to the boundary (rho = {rho}, epsilon = {epsilon})")]
    CenterTooClose { rho: f64, epsilon: f64 },

    #[error("linear solve did not converge: relative residual {residual:e} after {iterations} iterations")]
    LinearSolveFailure { iterations: usize, residual: f64 },

    #[error("descent did not converge within {iterations} iterations (relative gradient {gradient:e})")]
    MaxIterations { iterations: usize, gradient: f64 },

    #[error("line search failed at iteration {iteration} (relative gradient {gradient:e})")]
    LineSearchFailed { iteration: usize, gradient: f64 },

    #[error("iterate collapsed to zero")]
    CollapsedToZero,

    #[error("vortex core is empty (u <= q_eps everywhere)")]
    EmptyCore,

    #[error("need at least {needed} points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("operation requires a {expected} scenario")]
    WrongScenario { expected: &'static str },

    #[error("field size {got} does not match grid ({expected} nodes)")]
    FieldMismatch { expected: usize, got: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
