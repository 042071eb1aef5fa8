use thiserror::Error;

/// Failures reported by the numerical routines.
///
/// Every variant carries enough context to locate the offending parameter
/// point or time; none of them is used for control flow inside the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("operation requires a smooth field (epsilon > 0), got epsilon = {epsilon}")]
    NonSmoothLimit { epsilon: f64 },

    #[error("operation requires the piecewise-smooth limit (epsilon = 0), got epsilon = {epsilon}")]
    SmoothField { epsilon: f64 },

    #[error("equilibrium scan: sign change at the scan window boundary rho = {rho}")]
    ScanWindow { rho: f64 },

    #[error("no sign change of the curvature-root function within |rho - eta| <= {limit}")]
    BracketFailure { limit: f64 },

    #[error("tolerances must lie in (0, 1e-2], got rel_tol = {rel_tol}, abs_tol = {abs_tol}")]
    ToleranceDomain { rel_tol: f64, abs_tol: f64 },

    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("no equilibrium or periodic orbit detected by t = {t}")]
    NoConvergence { t: f64 },

    #[error("trajectory touches the switching line tangentially at t = {t}")]
    TangentialContact { t: f64 },

    #[error("no return to the switching line within t = {bound}")]
    Escape { bound: f64 },

    #[error("Newton iteration diverged: {0}")]
    NewtonDivergence(String),

    #[error("continuation stopped after {points} points: {reason}")]
    ContinuationFailure { points: usize, reason: String },

    #[error("mesh limit of {limit} intervals reached at mu = {mu}, eta = {eta}")]
    MeshLimit { limit: usize, mu: f64, eta: f64 },

    #[error("orbit does not cross the zone boundary rho = {target} (rho range [{rho_min}, {rho_max}])")]
    NoCrossing { target: f64, rho_min: f64, rho_max: f64 },

    #[error("no fold found in the continued range")]
    NoFold,

    #[error("fold at mu = {mu}, eta = {eta} misses the zone boundary by {gap}")]
    NotTangent { mu: f64, eta: f64, gap: f64 },

    #[error("window [{t0}, {t1}] contains {cycles} complete cycles, need at least 2")]
    TooFewCycles { t0: f64, t1: f64, cycles: usize },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("{0}")]
    Other(String),
}

pub type Result<T> = std::result::Result<T, Error>;
