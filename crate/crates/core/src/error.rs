use thiserror::Error;

/// Errors raised anywhere in the engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("cannot normalize: every weight is zero")]
    AllZeroWeights,

    #[error("distributions have different supports")]
    SupportMismatch,

    #[error("invalid space: {0}")]
    InvalidSpace(String),

    #[error("invalid model class: {0}")]
    InvalidClass(String),

    #[error("operation requires a finite model class")]
    LazyClassUnsupported,

    #[error("transition row for state {state}, action {action} is not a distribution (sum={sum})")]
    InvalidTransitionRow {
        state: usize,
        action: usize,
        sum: f64,
    },

    #[error("history out of sync: belief has consumed {consumed} steps, got history of length {got}")]
    HistoryDesync { consumed: usize, got: usize },

    #[error("no surviving posterior mass exceeds threshold {alpha}")]
    ThresholdUnreachable { alpha: f64 },

    #[error("checked {checked} models without resolving threshold {alpha}")]
    EnumerationBudgetExhausted { alpha: f64, checked: usize },

    #[error("model set is empty")]
    EmptyModelSet,

    #[error("instance too large for exhaustive enumeration ({0})")]
    InstanceTooLarge(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("mentor unavailable: {0}")]
    MentorUnavailable(String),

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("scenario spec parse error at line {line}, column {column}: {message}")]
    SpecParse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("realizability violated: {0}")]
    Unrealizable(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::SpecParse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
