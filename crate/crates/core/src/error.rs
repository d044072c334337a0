use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),
    #[error("unsupported dtype code {found}, expected {expected}")]
    UnsupportedDtype { expected: u8, found: u8 },
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: u64, found: u64 },
    #[error("embedding dimension must be positive")]
    DimensionZero,
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("row {0} is a zero vector")]
    ZeroVector(usize),
    #[error("ragged rows: row {row} has {found} values, expected {expected}")]
    RaggedRows { row: usize, expected: usize, found: usize },
    #[error("parse failure: {0}")]
    Parse(String),
    #[error("manifest mismatch: {rows} embedding rows but {records} manifest records")]
    ManifestMismatch { rows: usize, records: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("input set {0:?} is not normalized")]
    UnnormalizedInput(String),
    #[error("empty set {0:?}")]
    EmptySet(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("empty impostor score set")]
    EmptyImpostorSet,
    #[error("target FAR {0} outside (0, 1)")]
    TargetFarOutOfRange(f64),
    #[error("invalid histogram range [{lo}, {hi}] with {bins} bins")]
    InvalidRange { lo: f64, hi: f64, bins: usize },
    #[error("non-finite score encountered")]
    NonFiniteScore,
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("empty matches")]
    EmptyMatches,
    #[error("unknown pair id {0:?}")]
    UnknownPair(String),
    #[error("missing dataset {0:?}")]
    MissingDataset(String),
    #[error("missing benchmark scores")]
    MissingBenchmark,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
