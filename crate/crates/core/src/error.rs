use std::path::PathBuf;

/// Errors produced anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("index out of range: {what} {index} (size {size})")]
    OutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("sgd diverged at epoch {epoch} (objective is not finite); try a smaller learning_rate")]
    Diverged { epoch: usize },

    #[error("covariance matrix is singular: {0}; use a positive ridge")]
    Singular(String),

    #[error("requested {requested} components but the operator has numerical rank {attainable}")]
    RankDeficient { requested: usize, attainable: usize },

    #[error("sample {row} is absent from every view")]
    OrphanRow { row: usize },

    #[error(
        "the exact solver needs an estimated {required_mib} MiB for the L x L matrix \
         but the budget is {budget_mib} MiB; use the fast_issm variant"
    )]
    MemoryBudget { required_mib: u64, budget_mib: u64 },

    #[error("no cold-start test users qualify for c = {c}")]
    NoColdStartUsers { c: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("serialization: {0}")]
    Serde(String),

    #[error("at iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serde(e.to_string())
    }
}
