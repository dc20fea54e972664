use thiserror::Error;

/// Errors produced by the beam-alignment library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("series did not converge: {0}")]
    NonConvergence(String),

    #[error("beam too narrow: {required} active elements required but the array has {available}")]
    BeamTooNarrow { required: usize, available: usize },

    #[error("ragged codebook nesting: level size {child} is not a multiple of {parent}")]
    RaggedNesting { parent: usize, child: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("infeasible pilot budget: {0}")]
    InfeasibleBudget(String),

    #[error("unknown figure preset `{0}`")]
    UnknownPreset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
