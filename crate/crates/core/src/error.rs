use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not a valid Anosov base: {0}")]
    InvalidAnosov(String),
    #[error("invalid map parameter: {0}")]
    InvalidParameter(String),
    #[error("Newton iteration failed to converge after {iterations} steps (residual {residual:.3e})")]
    NewtonDiverged { iterations: usize, residual: f64 },
    #[error("bundle angle {angle:.3e} below configured minimum {min_angle:.3e}")]
    MinAngleViolation { angle: f64, min_angle: f64 },
    #[error("splitting warm-up too short: {0} iterates (need at least 50)")]
    InsufficientWarmup(usize),
    #[error("restriction of the derivative to the cu-plane is numerically singular (sigma_min = {0:.3e})")]
    SingularRestriction(f64),
    #[error("map validation failed: {0}")]
    ValidationFailed(String),
    #[error("all sampled expansion times are censored; threshold b too large")]
    AllCensored,
    #[error("decay fit refused: only {0} points above the noise floor (need at least 4)")]
    FitRefused(usize),
    #[error("unstable disk trim starvation: all iterated points escaped the radius-{0} ball")]
    TrimStarvation(f64),
    #[error("{0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
