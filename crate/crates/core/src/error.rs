use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("element count mismatch: {from} elements cannot be viewed as {to}")]
    ElementCountMismatch { from: usize, to: usize },

    #[error("invalid dims {0:?}: every extent must be >= 1 and at least one extent is required")]
    InvalidDims(Vec<usize>),

    #[error("data length {len} does not match dims {dims:?}")]
    DataLength { len: usize, dims: Vec<usize> },

    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("cannot contract: last extent {left} != first extent {right}")]
    ContractDimMismatch { left: usize, right: usize },

    #[error("shape error: {0}")]
    ShapeError(String),

    #[error("degenerate reflector: beta is zero")]
    DegenerateBeta,

    #[error("bidiagonal QR did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("truncation threshold needs at least 2 dims, got {0}")]
    BadDims(usize),

    #[error("epsilon must be finite and >= 0, got {0}")]
    InvalidEpsilon(f64),

    #[error("empty tensor")]
    EmptyTensor,

    #[error("rank chain broken at core {core}: {detail}")]
    RankChainBroken { core: usize, detail: String },

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch { expected: Vec<usize>, actual: Vec<usize> },

    #[error("scratchpad overflow: {needed_bytes} bytes needed, {capacity_bytes} available")]
    SpmOverflow { needed_bytes: u64, capacity_bytes: u64 },

    #[error("phase sets differ between variants")]
    PhaseSetMismatch,

    #[error("invalid machine config: {0}")]
    Config(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
