use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("pairing mismatch: expected {expected}, found {found}")]
    PairingMismatch { expected: String, found: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("data set is empty")]
    EmptyDataSet,

    #[error("state at quadrature point {0} has no assigned data tuple")]
    Unassigned(usize),

    #[error("singular system: {modes} unconstrained null-space mode(s)")]
    SingularSystem { modes: usize },

    #[error("linear solver failed: {0}")]
    LinearSolver(String),

    #[error("tuple {id}: {message}")]
    InvalidTuple { id: usize, message: String },

    #[error("Newton iteration failed after {iterations} iterations: {reason} (residual history {history:?})")]
    Newton {
        iterations: usize,
        reason: String,
        history: Vec<f64>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
