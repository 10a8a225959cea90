use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("group {0} has no rows")]
    EmptyGroup(&'static str),
    #[error("fraction {0} is outside the open interval (0, 1)")]
    InvalidFraction(f64),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("duplicate row id {0}")]
    DuplicateRowId(u64),
    #[error("unknown row id {0}")]
    UnknownRowId(u64),
    #[error("flip {direction} on row {row_id} does not match its current label {label}")]
    DirectionMismatch {
        row_id: u64,
        direction: &'static str,
        label: u8,
    },
    #[error("duplicate flip for row {0} with the same origin")]
    DuplicateFlip(u64),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("degenerate training set: {0}")]
    DegenerateTraining(String),
    #[error("expected {expected} feature columns, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("no rows are eligible for bias injection")]
    NoEligibleRows,
    #[error("injected flip log is empty; correct flip rate is undefined")]
    EmptyInjectedLog,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("majority selection rate is zero; disparate impact ratio is undefined")]
    ZeroMajorityRate,
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("no rows left after cleaning")]
    EmptyAfterCleaning,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn code(&self) -> &'static str {
        match self {
            Error::EmptyGroup(_) => "empty_group",
            Error::InvalidFraction(_) => "invalid_fraction",
            Error::SchemaMismatch(_) => "schema_mismatch",
            Error::DuplicateRowId(_) => "duplicate_row_id",
            Error::UnknownRowId(_) => "unknown_row_id",
            Error::DirectionMismatch { .. } => "direction_mismatch",
            Error::DuplicateFlip(_) => "duplicate_flip",
            Error::InvalidDataset(_) => "invalid_dataset",
            Error::DegenerateTraining(_) => "degenerate_training",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidSpec(_) => "invalid_spec",
            Error::NoEligibleRows => "no_eligible_rows",
            Error::EmptyInjectedLog => "empty_injected_log",
            Error::LengthMismatch(..) => "length_mismatch",
            Error::ZeroMajorityRate => "zero_majority_rate",
            Error::FileNotFound(_) => "file_not_found",
            Error::Schema(_) => "schema_error",
            Error::EmptyAfterCleaning => "empty_after_cleaning",
            Error::Io(_) => "io_error",
            Error::Csv(_) => "csv_error",
            Error::Json(_) => "json_error",
        }
    }
}
