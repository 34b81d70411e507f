use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("row {row}: expected {expected} columns, found {found}")]
    ColumnCount {
        row: usize,
        expected: String,
        found: usize,
    },

    #[error("row {row}: `{token}` in column `{column}` is not a number")]
    NotNumeric {
        row: usize,
        column: String,
        token: String,
    },

    #[error("row {row}: {field} = {value} is outside the allowed set {allowed:?}")]
    InvalidCode {
        row: usize,
        field: String,
        value: f64,
        allowed: Vec<u8>,
    },

    #[error("row {row}: {message}")]
    InvalidRow { row: usize, message: String },

    #[error("input contains no data rows")]
    EmptyInput,

    #[error("header is missing required column(s): {}", .0.join(", "))]
    MissingColumns(Vec<String>),

    #[error("malformed csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("training data must contain both classes")]
    SingleClass,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parameter `{name}` is not known to the {family} family")]
    UnknownParameter { family: String, name: String },

    #[error("unsupported model schema version {found} (this build reads version {expected})")]
    SchemaVersion { found: u64, expected: u64 },

    #[error("malformed model file at line {line}, column {column}: {message}")]
    ModelParse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid model envelope: {0}")]
    ModelValidation(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
