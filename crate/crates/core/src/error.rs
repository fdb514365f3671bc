use thiserror::Error;

pub type Result<T> = std::result::Result<T, FdpError>;

#[derive(Debug, Error)]
pub enum FdpError {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: String,
        found: String,
    },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid score model: {0}")]
    InvalidModel(String),

    #[error("invalid attack dataset: {0}")]
    InvalidDataset(String),

    #[error("unsupported schema version {found} (expected {expected})")]
    SchemaVersion { found: u64, expected: u64 },

    #[error("score is not a finite positive number ({value}) for target {target}")]
    BadScore { target: usize, value: f64 },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("feature difference system is singular (condition estimate {condition:e}); dependent configuration rows: {rows:?}")]
    SingularSystem { rows: Vec<usize>, condition: f64 },

    #[error("target {target} in configuration group {group} has no observed attacks; choose another pair or enable smoothing")]
    PairSelection { group: usize, target: usize },

    #[error("training produced a non-finite objective at epoch {epoch}, step {step} (last finite log-likelihood {last_finite})")]
    TrainingDiverged {
        epoch: usize,
        step: usize,
        last_finite: f64,
    },

    #[error("{name} = {value} is out of range: {expected}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("enumeration size {size} exceeds cap {cap}")]
    EnumerationCap { size: u128, cap: u128 },

    #[error("solver error: {0}")]
    Solver(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl FdpError {
    pub(crate) fn dims(what: &'static str, expected: impl ToString, found: impl ToString) -> Self {
        FdpError::DimensionMismatch {
            what,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
