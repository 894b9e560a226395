//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("worker {0} is adversarial; honest samples are produced by the attack model")]
    AdversarialWorker(usize),

    #[error("recoverability failure: eta = {eta} is not positive, robustness constant undefined")]
    RecoverabilityFailure { eta: f64 },

    #[error("instance too large for exact certification (N = {n}, d = {d}); use multistart mode")]
    TooLargeForExact { n: usize, d: usize },

    #[error("linear program is infeasible")]
    LpInfeasible,

    #[error("linear program did not certify optimality (residual {0:.3e})")]
    LpNotCertified(f64),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("config validation failed:\n{0}")]
    ConfigInvalid(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
