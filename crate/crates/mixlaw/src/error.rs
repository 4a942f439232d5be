use thiserror::Error;

/// Errors produced by the library. The CLI maps these onto exit codes:
/// data-level problems exit 2, fit-level problems exit 3.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A size-aware law was asked to evaluate an observation without a model size.
    #[error("missing model size: {0}")]
    MissingModelSize(String),

    /// A dataset or group contained no usable observations.
    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    /// A split could not be constructed from the dataset.
    #[error("split error: {0}")]
    Split(String),

    /// A requested budget or weight lies outside the observed range.
    #[error("out of range: {0}")]
    OutOfRange(String),

    /// A data file could not be parsed. `line` is 1-based when known.
    #[error("parse error{}: {msg}", match .line { Some(l) => format!(" (line {l})"), None => String::new() })]
    Parse { line: Option<u64>, msg: String },

    /// A structured file had an unsupported or inconsistent schema.
    #[error("schema error: {0}")]
    Schema(String),

    /// Too few observations to fit the requested family.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// The optimizer finished on a non-finite objective value.
    #[error("non-finite objective {objective} at params {params:?}")]
    NonFiniteObjective { objective: f64, params: Vec<f64> },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the fitting stage as opposed to bad input data.
    pub fn is_fit_failure(&self) -> bool {
        matches!(
            self,
            Error::InsufficientData(_) | Error::NonFiniteObjective { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
