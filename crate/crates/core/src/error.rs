use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised across the library.
///
/// Validation problems on an [`crate::estimand::Estimand`] are *not* errors;
/// they are reported as data by `validate_estimand`.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("schema mismatch: expected columns {expected:?}, found {found:?}")]
    SchemaMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },
    #[error("non-finite value at row {row}, column {column}")]
    NonFinite { row: usize, column: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("allocation of {requested} exceeds stratum {stratum:?} of size {available}")]
    AllocationExceedsStratum {
        stratum: String,
        requested: usize,
        available: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("non-finite input to {0}")]
    NonFiniteInput(&'static str),
    #[error("k = {k} exceeds the number of points n = {n}")]
    KExceedsN { k: usize, n: usize },
    #[error("leverage of row {row} is 1; leave-one-out residual undefined")]
    DegenerateLeverage { row: usize },
    #[error("clusterings cover different record universes ({left} vs {right} records)")]
    UniverseMismatch { left: usize, right: usize },
    #[error("no predicted pairs: precision undefined")]
    NoPredictedPairs,
    #[error("no true pairs: recall undefined")]
    NoTruePairs,
    #[error("cluster sample is empty")]
    EmptySample,
    #[error("unknown true cluster id {0}")]
    UnknownCluster(u32),
    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),
    #[error("no items to stratify")]
    EmptyItems,
    #[error("unknown model {0:?}")]
    UnknownModel(String),
    #[error("no records to aggregate")]
    EmptyRecords,
    #[error("strata tables are empty")]
    EmptyStrata,
    #[error("strata tables have different keys")]
    StrataMismatch,
    #[error("weights have length {found}, expected {expected}")]
    WeightDimensionMismatch { expected: usize, found: usize },
    #[error("comparison matrix is not reciprocal at ({row}, {col})")]
    NonReciprocalMatrix { row: usize, col: usize },
    #[error("power iteration did not converge in {0} iterations")]
    NonConvergence(usize),
    #[error("statistic failed on bootstrap resample {0}")]
    DegenerateStatistic(usize),
    #[error("invalid estimand: {0:?}")]
    InvalidEstimand(Vec<String>),
    #[error("config error: {0}")]
    Config(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
