use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("missing column `{column}` in {relation}")]
    MissingColumn { relation: String, column: String },
    #[error("duplicate base identifier {id_tuple:?} (rows {first} and {second})")]
    DuplicateBaseId {
        id_tuple: String,
        first: usize,
        second: usize,
    },
    #[error("row {row}, column `{column}`: cannot parse {value:?} as a number")]
    BadNumber {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}: expected {expected} fields, found {found}")]
    RowWidth {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("unknown identifier {0:?}")]
    UnknownId(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("candidate set has no edges")]
    NoEdges,
    #[error("minimum is infeasible: {coverable} coverable groups cannot all be matched under cap {cap}")]
    Infeasible { coverable: usize, cap: usize },
    #[error("instance too large to enumerate ({0} assignments)")]
    TooLarge(f64),
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("ambiguous column `{0}`; qualify it as base.{0} or aug.{0}")]
    AmbiguousColumn(String),
    #[error("type error: {0}")]
    Type(String),
    #[error("negative aggregation value {value} in column `{column}`")]
    NegativeValue { column: String, value: f64 },
    #[error("average is undefined: no group has a qualifying pair")]
    UndefinedAverage,
    #[error("nominal result is zero")]
    ZeroNominal,
    #[error("no cap bounds the true result")]
    NoBoundingCap,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
