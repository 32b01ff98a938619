use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("future path must start at the origin, found {0}")]
    NonzeroOrigin(f64),

    #[error("invalid interval [{a}, {b}]")]
    InvalidInterval { a: f64, b: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("sample budget {0} is too small, stochastic operators need at least 2 samples")]
    Budget(usize),

    #[error("functional horizon {horizon:?} exceeds the allowed horizon {allowed}")]
    Horizon { horizon: Option<f64>, allowed: f64 },

    #[error("time {t} lies outside the window [0, {end}]")]
    Window { t: f64, end: f64 },

    #[error("source term violates its integrability hint: |phi| = {value} > {hint} at t = {t}")]
    Integrability { t: f64, value: f64, hint: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
