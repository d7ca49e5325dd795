use thiserror::Error;

pub type Result<T, E = PolarError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum PolarError {
    #[error("index {index} is outside 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("non-binary symbol at position {at}")]
    NonBinary { at: usize },

    #[error("block length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("invalid index set: {0}")]
    InvalidIndexSet(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("erasure probability {0} is outside [0, 1]")]
    ErasureOutOfRange(f64),

    #[error("information length {k} is outside 1..={len}")]
    InfoLengthOutOfRange { k: usize, len: usize },

    #[error("no information bit has Bhattacharyya parameter above alpha = {alpha}; composite model is degenerate")]
    EmptyBrickWall { alpha: f64 },

    #[error("error vector has support at frozen position {0}")]
    SupportOutsideInfoSet(usize),

    #[error("position {0} is not an information position")]
    NotInfoPosition(usize),

    #[error("contradictory known symbols while decoding bit {bit}; observations are not from an erasure channel")]
    ContradictoryObservation { bit: usize },

    #[error("block length {len} exceeds the exhaustive-enumeration limit of {limit}")]
    TooLargeForEnumeration { len: usize, limit: usize },

    #[error("zero denominator in gain estimate")]
    ZeroDenominator,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
