use thiserror::Error;

use crate::config::Violation;

/// Errors produced by the simulator and the closed-form evaluators.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {}", format_violations(.0))]
    InvalidConfig(Vec<Violation>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("zero-norm channel for {0}")]
    ZeroChannel(String),

    #[error("infeasible placement: {0}")]
    Infeasible(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}
