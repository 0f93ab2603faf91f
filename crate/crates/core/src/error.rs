use thiserror::Error;

/// Errors produced by the `catdp` library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("category space needs at least two categories, got {0}")]
    TooFewCategories(usize),

    #[error("duplicate category label {0:?}")]
    DuplicateLabel(String),

    #[error("unknown category label {label:?} at row {row}")]
    UnknownLabel { label: String, row: usize },

    #[error("database must have at least one row")]
    EmptyDatabase,

    #[error("category index {index} out of range for {categories} categories")]
    IndexOutOfRange { index: usize, categories: usize },

    #[error("length mismatch: {left} rows vs {right} rows")]
    LengthMismatch { left: usize, right: usize },

    #[error("databases {0:?} and {1:?} are not neighbours")]
    NotNeighbours(Vec<usize>, Vec<usize>),

    #[error("enumeration too large: {what} has {size} elements, budget is {budget}")]
    EnumerationTooLarge {
        what: &'static str,
        size: String,
        budget: u64,
    },

    #[error("utility table incomplete: expected {expected} entries, found {found}")]
    IncompleteUtility { expected: usize, found: usize },

    #[error("parameter out of range: {0}")]
    ParameterRange(String),

    #[error("matrix is not row-stochastic: {0}")]
    NotStochastic(String),

    #[error("asserted fixed normalisation does not hold: log C_d ranges over [{min}, {max}]")]
    NormalizationNotFixed { min: f64, max: f64 },

    #[error("unsupported at scale: {0}")]
    UnsupportedAtScale(String),

    #[error("exact arithmetic unavailable: {0}")]
    NotExact(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for the budget family of errors (enumeration or sampling limits).
    pub fn is_budget(&self) -> bool {
        matches!(
            self,
            Error::EnumerationTooLarge { .. } | Error::UnsupportedAtScale(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
