use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{0} is not a prime power")]
    NotPrimePower(u64),
    #[error("field order {q} exceeds the supported limit {limit}")]
    FieldTooLarge { q: u64, limit: u64 },
    #[error("division by zero in GF({0})")]
    DivisionByZero(u32),
    #[error("index {index} out of range (bound {bound})")]
    IndexOutOfRange { index: usize, bound: usize },
    #[error("column set must be non-empty")]
    EmptyColumnSet,
    #[error("{what}: estimated cost {needed} exceeds budget {budget}")]
    BudgetExceeded {
        what: &'static str,
        needed: u128,
        budget: u128,
    },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("outside supported domain: {0}")]
    Domain(String),
    #[error("threshold scan bracket not achieved: {0}")]
    BracketNotAchieved(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) | Error::Config(_) | Error::Json(_) | Error::InvalidParams(_) => 2,
            Error::BudgetExceeded { .. } => 3,
            Error::Io(_) => 4,
            _ => 1,
        }
    }
}
