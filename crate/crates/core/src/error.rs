use thiserror::Error;

/// Errors raised anywhere in the surrogate pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("waveform has zero norm")]
    ZeroNorm,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error(
        "greedy sweep stalled after {iterations} iterations: worst projection error {achieved:e} > tolerance {tol:e}"
    )]
    GreedyStalled {
        iterations: usize,
        achieved: f64,
        tol: f64,
    },

    #[error("EIM node matrix is singular (condition estimate {condition:e})")]
    SingularNodes { condition: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("duplicate knot at q = {0}")]
    DuplicateKnot(f64),

    #[error("container format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
