use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("rate floor {requested:.6} bits is infeasible (maximum {achievable:.6} bits)")]
    Infeasible { requested: f64, achievable: f64 },

    #[error("aliasing: {samples} samples per period cannot resolve frequency index {required}")]
    Aliasing { samples: usize, required: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("tap profile: {0}")]
    TapProfile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
