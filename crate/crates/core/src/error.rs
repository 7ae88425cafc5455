use thiserror::Error;

use crate::intervals::Clause;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("capacity exceeded: {what} needs {requested}, limit is {limit}")]
    Capacity {
        what: String,
        requested: u128,
        limit: u128,
    },

    #[error("budget condition fails: sum exp(-c^2/{denom}) = {sum} exceeds dim/16 = {limit}")]
    Budget { sum: f64, limit: f64, denom: f64 },

    #[error("solver failed after {attempts} attempt(s): {reason}")]
    SolverFailure { attempts: u32, reason: String },

    #[error("interval family violates clause(s) {}", fmt_clauses(.clauses))]
    FamilyInvalid { clauses: Vec<Clause> },

    #[error("fractional start has sup norm {achieved}, which exceeds 1")]
    StartTooLarge { achieved: f64 },

    #[error("assembly failed: {0}")]
    Assembly(String),

    #[error("parse error at byte {offset}: {msg}")]
    Parse { offset: usize, msg: String },

    #[error("verification failed: {0}")]
    Verification(String),
}

fn fmt_clauses(c: &[Clause]) -> String {
    c.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", ")
}

impl Error {
    /// Stable machine-readable tag used in structured error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidConfig(_) => "invalid_config",
            Error::Capacity { .. } => "capacity",
            Error::Budget { .. } => "budget",
            Error::SolverFailure { .. } => "solver_failure",
            Error::FamilyInvalid { .. } => "family_invalid",
            Error::StartTooLarge { .. } => "start_too_large",
            Error::Assembly(_) => "assembly",
            Error::Parse { .. } => "parse",
            Error::Verification(_) => "verification",
        }
    }
}
