use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("malformed message: {0}")]
    MalformedMessage(String),

    #[error("infeasible rate: user {user} is associated with column {column} but has zero rate")]
    InfeasibleRate { user: usize, column: usize },

    #[error("infeasible instance: user {user} cannot reach any allowed column")]
    Infeasible { user: usize },

    #[error("malformed solution: {0}")]
    MalformedSolution(String),

    #[error("instance too large for exhaustive search: {columns}^{users} assignments exceeds {limit}")]
    TooLarge { users: usize, columns: usize, limit: u64 },

    #[error("linear program failed: {0}")]
    Solver(String),

    #[error("invalid config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
