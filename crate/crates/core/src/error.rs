use thiserror::Error;

/// Errors raised by the core routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid partition: {0}")]
    InvalidPartition(&'static str),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is singular or nearly singular (sigma_min = {sigma_min:e}, sigma_max = {sigma_max:e})")]
    Singular { sigma_min: f64, sigma_max: f64 },
    #[error("block index ({j}, {k}) out of range for {t} blocks")]
    BlockIndex { j: usize, k: usize, t: usize },
    #[error("matrix is not in W_tau (block Gram deviation {deviation:e})")]
    NotMember { deviation: f64 },
    #[error("block {block} is not orthogonal (deviation {deviation:e})")]
    NotOrthogonal { block: usize, deviation: f64 },
    #[error("invalid block permutation: {0}")]
    InvalidPermutation(&'static str),
    #[error("invalid gamma: {0}")]
    InvalidGamma(&'static str),
    #[error("operation needs a partition with at least two blocks")]
    TooFewBlocks,
    #[error("no size-preserving block assignment exists")]
    NoAssignment,
    #[error("matrix set is empty")]
    EmptySet,
    #[error("singular value decomposition did not converge")]
    NoConvergence,
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
