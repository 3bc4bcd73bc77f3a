use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid map: {0}")]
    InvalidMap(String),

    #[error("numerator and denominator share a root (normalized resultant {resultant:.3e})")]
    NotCoprime { resultant: f64 },

    #[error("derivative undefined at pole")]
    DerivativeAtPole,

    #[error("internal invariant violation: {0}")]
    Internal(String),

    #[error("root finder failed to converge after {iterations} iterations (max residual {residual:.3e})")]
    RootFinding { iterations: usize, residual: f64 },

    #[error("degree budget exceeded: degree {degree} > budget {budget}")]
    DegreeBudget { degree: u64, budget: u64 },

    #[error("point is not periodic with period {period} (residual {residual:.3e})")]
    NotPeriodic { period: usize, residual: f64 },

    #[error("exceptional starting point")]
    ExceptionalStart,

    #[error("map not numerically hyperbolic on sample (lambda_hat = {lambda_hat:.6})")]
    NotHyperbolic { lambda_hat: f64 },

    #[error("orbit left Julia neighborhood at step {step}")]
    OrbitEscaped { step: u64 },

    #[error("insufficient resolution: {usable} usable radii, need at least {required}")]
    InsufficientResolution { usable: usize, required: usize },

    #[error("insufficient recurrence data: {finite} usable rows, need at least {required}")]
    InsufficientRecurrence { finite: usize, required: usize },

    #[error("no repelling periodic points of period {period}")]
    NoRepellingPoints { period: usize },

    #[error("pressure does not change sign on [{lo}, {hi}]: P({lo}) = {p_lo:.6e}, P({hi}) = {p_hi:.6e}")]
    Bracket { lo: f64, hi: f64, p_lo: f64, p_hi: f64 },
}
