use thiserror::Error;

/// Errors raised by the field, reference, ergodic, control and engine layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("degenerate deposit: total mass {0} is not positive")]
    DegenerateDeposit(f64),

    #[error("point ({x}, {y}) lies outside the domain")]
    OutOfDomain { x: f64, y: f64 },

    #[error("invalid mixture: {0}")]
    InvalidMixture(String),

    #[error("degenerate mass: all time-averaged mass lies in the hole region (a = {0})")]
    DegenerateMass(f64),

    #[error("zero direction: target coincides with the agent position")]
    ZeroDirection,

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed snapshot: {0}")]
    Format(String),

    #[error("stall: no arrival at hole {hole} after {steps} travel steps (k = {k})")]
    Stall { hole: usize, steps: u64, k: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;
