//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("header parse error: {0}")]
    Header(String),

    #[error("unknown element kind: {0}")]
    UnknownElementKind(String),

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("constant volume")]
    ConstantVolume,

    #[error("dims too small: {0}")]
    DimsTooSmall(String),

    #[error("ragged slice set: {0}")]
    RaggedSlices(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("empty mask")]
    EmptyMask,

    #[error("empty region")]
    EmptyRegion,

    #[error("empty map set")]
    EmptyMapSet,

    #[error("misaligned dims: {0}")]
    MisalignedDims(String),

    #[error("unmapped label id {0}")]
    UnmappedLabel(u8),

    #[error("segments too few: {0} (minimum 16)")]
    SegmentsTooFew(usize),

    #[error("degenerate pose: {0}")]
    DegeneratePose(String),

    #[error("singular segment distance at voxel {0:?}")]
    SingularSegmentDistance([usize; 3]),

    #[error("all-air volume")]
    AllAirVolume,

    #[error("solver did not converge: relative residual {residual:.3e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },

    #[error("missing view: {0}")]
    MissingView(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}
