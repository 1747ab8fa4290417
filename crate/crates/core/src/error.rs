use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid coefficients: {0}")]
    InvalidCoefficients(String),
    #[error("exponential overflow: 4u = {0:e}")]
    Overflow(f64),
    #[error("step size underflow at t = {t}: |h| = {h:e}")]
    StepFailure { t: f64, h: f64 },
    #[error("no bounded orbit: {0}")]
    NoBoundedOrbit(String),
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("wrong level: {0}")]
    WrongLevel(String),
    #[error("no invariant disc: {0}")]
    NoDisc(String),
    #[error("no real u(0) for epsilon = {0}")]
    NoRealU0(f64),
    #[error("invalid bracket: {0}")]
    BracketInvalid(String),
    #[error("not a stationary point: {0}")]
    NotStationary(String),
    #[error("epsilon = {eps} must lie in (0, {max})")]
    EpsilonTooLarge { eps: f64, max: f64 },
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("phi e^(-2t) is not flat: relative spread {0:e}")]
    PlateauNotFound(f64),
    #[error("integration failed: {0}")]
    Integration(String),
}

pub type Result<T> = std::result::Result<T, Error>;
