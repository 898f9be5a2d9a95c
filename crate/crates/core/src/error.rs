use thiserror::Error;

/// Errors raised by the tensor algebra and decomposition routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid shape {shape:?}: {reason}")]
    InvalidShape { shape: Vec<usize>, reason: String },

    #[error("mode {mode} out of range for order-{order} tensor")]
    ModeOutOfRange { mode: usize, order: usize },

    #[error("dimension mismatch in {op}: {detail}")]
    DimensionMismatch { op: &'static str, detail: String },

    #[error("rank {rank} out of range (must satisfy {lower} <= rank <= {upper})")]
    RankOutOfRange {
        rank: usize,
        lower: usize,
        upper: usize,
    },

    #[error("mode {mode}: rank {rank} exceeds sketch size {sketch}")]
    RankExceedsSketch {
        mode: usize,
        rank: usize,
        sketch: usize,
    },

    #[error("mode {mode}: sketch size {sketch} exceeds limit {limit}")]
    SketchTooLarge {
        mode: usize,
        sketch: usize,
        limit: usize,
    },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{0} is zero; the operation is undefined")]
    ZeroInput(&'static str),

    #[error("tensor ring closure violated between core {left} (right rank {left_rank}) and core {right} (left rank {right_rank})")]
    RingClosure {
        left: usize,
        left_rank: usize,
        right: usize,
        right_rank: usize,
    },

    #[error("reference approximation is exact; relative error is undefined")]
    ExactReference,

    #[error("malformed tensor file: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
