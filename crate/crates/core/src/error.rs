use thiserror::Error;

use crate::sar::TargetedVariable;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice dimensions {rows}x{cols}")]
    InvalidDimension { rows: usize, cols: usize },

    /// Line numbers are 1-based; 0 refers to the input as a whole.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("geojson ingestion failed: {0}")]
    Ingest(String),

    #[error("shape mismatch: expected length {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("system (I - rho W) is singular or unstable at rho = {rho}")]
    Singular { rho: f64 },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("insufficient data: need at least {needed} values, got {actual}")]
    InsufficientData { needed: usize, actual: usize },

    #[error("ratio undefined: {0} is zero")]
    UndefinedRatio(&'static str),

    #[error("no permutation reached the target rho window after {attempts} attempts (closest estimate {})", best.estimated_rho)]
    RetryExhausted { attempts: usize, best: Box<TargetedVariable> },

    #[error("invalid number of regions k = {k} for n = {n}")]
    InvalidK { k: usize, n: usize },

    #[error("contiguous regions are impossible: the weights graph is disconnected")]
    ContiguityImpossible,

    #[error("corrupt partition: {0}")]
    CorruptPartition(String),

    #[error("unsupported significance level {0}; expected 0.01, 0.05 or 0.1")]
    InvalidLevel(f64),

    #[error("experiment stalled: acceptance rate {rate:.2e} over the last {window} attempts")]
    Stall { rate: f64, window: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
