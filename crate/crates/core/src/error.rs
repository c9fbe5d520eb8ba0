use thiserror::Error;

/// Errors raised by the estimator library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MmseError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("block {block} has zero mass")]
    ZeroMassBlock { block: usize },

    #[error("measure charges point {index} which the reference measure does not")]
    AbsoluteContinuity { index: usize },

    #[error("random variable is not measurable with respect to the partition")]
    NotMeasurable,

    #[error("measure set is not proper: {0}")]
    NotProper(String),

    #[error("pasting degenerate: tail measure has zero mass on block {block}")]
    PastingDegeneracy { block: usize },

    #[error("refused: {0}")]
    GuardRefusal(String),

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, MmseError>;

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(MmseError::DimensionMismatch { expected, found })
    }
}
