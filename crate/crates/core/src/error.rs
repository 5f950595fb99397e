use thiserror::Error;

/// Errors raised by the numerical kernels, the data model and the optimizers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian (relative residual {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),

    #[error("state vector norm deviates from 1 by {deviation:.3e}")]
    NotNormalized { deviation: f64 },

    #[error("matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("logarithm base must be > 1, got {0}")]
    InvalidLogBase(f64),

    #[error("channel violates completeness: residual {residual:.3e} exceeds {tol:.1e}")]
    NotTracePreserving { residual: f64, tol: f64 },

    #[error("infeasible channel shape: K*M = {km} < N = {n}")]
    InfeasibleShape { km: usize, n: usize },

    #[error("empty operator set")]
    EmptyOperatorSet,

    #[error("degenerate Kraus set: {clamped} eigenvalues of the accumulated Gram matrix below floor {floor:.1e}")]
    DegenerateGram { clamped: usize, floor: f64 },

    #[error("Hermitian eigensolver did not converge")]
    EigenNonConvergence,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("optimization failed at iteration {iteration}: {source}")]
    Optimization {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

/// Broad failure classes, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numerical,
    Io,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::DegenerateGram { .. }
            | Error::EigenNonConvergence
            | Error::NonFinite
            | Error::NotPositiveSemidefinite { .. } => ErrorKind::Numerical,
            Error::Optimization { source, .. } => source.kind(),
            Error::Io { .. } | Error::Json { .. } => ErrorKind::Io,
            _ => ErrorKind::Validation,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
