use std::path::PathBuf;

use thiserror::Error;

/// Failure while reading a TTP instance file.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    /// 1-based line number; 0 when the problem is the file as a whole.
    pub line: usize,
    pub message: String,
}

impl ParseError {
    pub(crate) fn new(line: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("packing weight {weight} exceeds capacity {capacity}")]
    Infeasible { weight: f64, capacity: f64 },

    #[error("knapsack table needs {required} bytes, budget is {budget}; use the bounded (greedy) fallback")]
    KnapsackCapacity { required: u128, budget: u64 },

    #[error("knapsack DP needs integral weights and capacity: {0}")]
    FractionalWeights(String),

    #[error("initialisation left the QD grid empty; widen alpha1/alpha2")]
    EmptyGrid,

    #[error("EDO population is empty")]
    EmptyPopulation,

    #[error("member {0} is not in the population")]
    UnknownMember(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
