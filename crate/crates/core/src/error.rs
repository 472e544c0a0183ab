use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("vector must be non-empty with finite elements")]
    InvalidVector,

    #[error("negative or non-finite distance {0}")]
    NegativeDistance(f64),

    #[error("invalid Minkowski order {0}, must be >= 1")]
    InvalidOrder(u32),

    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },

    #[error("duplicate id {0:?}")]
    DuplicateId(String),

    #[error("requested {requested} negative pairs but only {available} wrong combinations exist")]
    InsufficientPairs { requested: usize, available: usize },

    #[error("relatedness score {0} outside [0, 5]")]
    OutOfRange(f64),

    #[error("empty batch")]
    EmptyBatch,

    #[error("invalid label {0}, expected 0 or 1")]
    InvalidLabel(u8),

    #[error("non-finite gradient")]
    NonFiniteGradient,

    #[error("gradient shape does not match parameters")]
    ShapeMismatch,

    #[error("pair references unknown embedding id {0:?}")]
    UnresolvedId(String),

    #[error("dataset contains a single class")]
    SingleClassDataset,

    #[error("input contains a single class")]
    SingleClassInput,

    #[error("distance {0} outside [0, 1]")]
    OutOfRangeDistance(f64),

    #[error("right-match distribution lies at or beyond the wrong-match distribution")]
    DistributionsInverted,

    #[error("distributions do not cross")]
    NoCrossing,

    #[error("no samples for the {0} side")]
    EmptySide(&'static str),

    #[error(
        "sample {distance} lies on the wrong side of threshold {threshold} for the {side} table"
    )]
    WrongSideSample {
        side: &'static str,
        distance: f64,
        threshold: f64,
    },

    #[error("cannot rescale: max equals min")]
    DegenerateScale,

    #[error("table threshold {table} does not match threshold {expected}")]
    ThresholdMismatch { table: f64, expected: f64 },

    #[error("malformed report input: {0}")]
    MalformedReportInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable code for the error kind.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::InvalidVector => "InvalidVector",
            Error::NegativeDistance(_) => "NegativeDistance",
            Error::InvalidOrder(_) => "InvalidOrder",
            Error::MalformedRecord { .. } => "MalformedRecord",
            Error::DuplicateId(_) => "DuplicateId",
            Error::InsufficientPairs { .. } => "InsufficientPairs",
            Error::OutOfRange(_) => "OutOfRange",
            Error::EmptyBatch => "EmptyBatch",
            Error::InvalidLabel(_) => "InvalidLabel",
            Error::NonFiniteGradient => "NonFiniteGradient",
            Error::ShapeMismatch => "ShapeMismatch",
            Error::UnresolvedId(_) => "UnresolvedId",
            Error::SingleClassDataset => "SingleClassDataset",
            Error::SingleClassInput => "SingleClassInput",
            Error::OutOfRangeDistance(_) => "OutOfRangeDistance",
            Error::DistributionsInverted => "DistributionsInverted",
            Error::NoCrossing => "NoCrossing",
            Error::EmptySide(_) => "EmptySide",
            Error::WrongSideSample { .. } => "WrongSideSample",
            Error::DegenerateScale => "DegenerateScale",
            Error::ThresholdMismatch { .. } => "ThresholdMismatch",
            Error::MalformedReportInput(_) => "MalformedReportInput",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::Io { .. } => "Io",
            Error::Json(_) => "Json",
            Error::Csv(_) => "Csv",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
