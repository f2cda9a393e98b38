use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {what} has length {got}, expected {expected}")]
    Dimension {
        what: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("exhaustive search over {vars} variables exceeds the limit of {limit}")]
    ExhaustiveLimit { vars: usize, limit: usize },

    #[error("unknown label {label} (registry has {len} labels)")]
    UnknownLabel { label: usize, len: usize },

    #[error("vertex space too large to rank into 64 bits")]
    RankOverflow,

    #[error("pruning left no edges for some label (gamma = {gamma})")]
    PruneExhausted { gamma: f64 },

    #[error("heavy set {set:?} has degree {degree} > threshold {threshold}; decompose first")]
    NotRegular {
        set: Vec<u32>,
        degree: usize,
        threshold: f64,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
