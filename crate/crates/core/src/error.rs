use thiserror::Error;

/// Errors raised by the laboratory. Variants carry enough context to make a
/// failed check reproducible from the report alone.
#[derive(Debug, Error)]
pub enum Error {
    #[error("negative input u = {0}")]
    NegativeInput(f64),

    #[error("log-domain underflow at log u = {log_u}: affine branch argument is not positive")]
    LogDomainError { log_u: f64 },

    #[error("quadrature did not converge: {0}")]
    QuadratureNoConvergence(String),

    #[error("invalid range: {0}")]
    InvalidRange(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("hypothesis {flag} not satisfied: {detail}")]
    HypothesesUnmet { flag: &'static str, detail: String },

    #[error("admissibility window violated: {0}")]
    WindowViolation(String),

    #[error("interval ordering violated at i = {index}: theta*u_(i+1) >= u_i")]
    OrderingViolation { index: u32 },

    #[error("convexity window never holds up to i = {i_max}")]
    NeverHolds { i_max: u32 },

    #[error("F-monotonicity limit p/(theta(p-1)) = {limit} is not above one")]
    LimitNotAboveOne { limit: f64 },

    #[error("diagonal membership fails at i = {index}: {detail}")]
    MembershipViolation { index: u32, detail: String },

    #[error("kernel ratio bound violated at y = {y:?}: ratio {ratio}")]
    BoundViolated { y: Vec<f64>, ratio: f64 },

    #[error("step size underflow at t = {t} without blow-up growth (h = {h})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("pointwise nonlinear flow overflowed inside a step at t = {t} (dt = {dt})")]
    NonlinearSubstepOverflow { t: f64, dt: f64 },

    #[error("Jensen inequality violated: lhs = {lhs}, rhs = {rhs}")]
    ConvexityViolation { lhs: f64, rhs: f64 },

    #[error("supersolution inequality F(w) <= w violated by {excess} at t = {t}")]
    SupersolutionViolation { t: f64, excess: f64 },

    #[error("domain too small: inner-box mass fraction {fraction} at t = {t}")]
    DomainTooSmall { t: f64, fraction: f64 },

    #[error("missing snapshot at t = {0}")]
    MissingSnapshot(f64),

    #[error("manifest: {0}")]
    Manifest(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
