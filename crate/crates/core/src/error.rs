//! Error type shared by every module.

use crate::ClassId;

/// Every failure the engine can report.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("class has no samples")]
    EmptyClass,
    #[error("zero-norm vector")]
    ZeroVector,
    #[error("unknown class {0}")]
    UnknownClass(ClassId),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("no source features available")]
    NoSources,
    #[error("rank {rank} out of range ({available} classes ranked)")]
    RankOutOfRange { rank: usize, available: usize },
    #[error("feature pool is empty for class {0}")]
    EmptyPool(ClassId),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("training needs at least two classes")]
    NeedTwoClasses,
    #[error("non-finite value in input")]
    NonFinite,
    #[error("k = {k} out of range for {classes} classes")]
    InvalidK { k: usize, classes: usize },
    #[error("empty evaluation set")]
    EmptySet,
    #[error("cannot split {total} classes into {initial} + {states} equal states")]
    BadSplit {
        total: usize,
        states: usize,
        initial: usize,
    },
    #[error("not a feature bank (bad magic)")]
    NotABank,
    #[error("corrupt file: {0}")]
    Corrupt(String),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
