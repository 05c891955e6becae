use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid parameter box: {0}")]
    InvalidBox(String),

    #[error("invalid observations: {0}")]
    InvalidObservations(String),

    #[error("uniform angle {0} must lie strictly inside (-pi/2, pi/2)")]
    AngleDomain(f64),

    #[error("exponential variate {0} must be positive")]
    ExponentialDomain(f64),

    #[error("stable draw overflowed f64 (alpha = {alpha})")]
    NonFiniteDraw { alpha: f64 },

    #[error("density accuracy not met: estimate {estimate:e}, error estimate {error:e}")]
    AccuracyNotMet { estimate: f64, error: f64 },

    #[error("truncated proposal stalled: {fallbacks} of {count} draws hit the rejection cap")]
    RejectionStall { fallbacks: usize, count: usize },

    #[error("simulation budget exhausted after {draws} draws ({accepted} of {needed} accepted)")]
    BudgetExhausted { draws: u64, accepted: usize, needed: usize },

    #[error("degenerate importance weights: {0}")]
    DegenerateWeights(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate measurement for individual {id} on day {day}")]
    DuplicateMeasurement { id: String, day: i64 },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
