use std::path::PathBuf;

use thiserror::Error;

/// Failures raised while reading or validating a scenario configuration.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid configuration: {0}")]
    Validation(String),
}

/// Errors from the numerical layer and the optimization algorithms.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    /// Stacked SU channel Gram matrix is numerically singular.
    #[error("SU channel matrix is singular (condition number {condition:.3e})")]
    SingularChannel { condition: f64 },
    #[error("zero-norm reference channel")]
    ZeroVector,
    /// Two positive eigenvalues coincide even after jittering.
    #[error("positive eigenvalues {0:.6e} and {1:.6e} are not distinct")]
    DegenerateSpectrum(f64, f64),
    #[error("cluster {cluster} failed scheduling after {attempts} draws")]
    Unschedulable { cluster: usize, attempts: usize },
    #[error("problem is infeasible: {0}")]
    Infeasible(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T, E = SolveError> = std::result::Result<T, E>;

/// Failures of an experiment sweep as a whole. Per-realization solver errors
/// are recorded in the output instead.
#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("failed to write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to write {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}
