use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NonSymmetric { asymmetry: f64 },

    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e}, floor {floor:e})")]
    NotPositiveDefinite { min_eigenvalue: f64, floor: f64 },

    #[error("matrix is too ill-conditioned (condition number {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("{0} failed to converge")]
    NoConvergence(&'static str),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: String, found: String },

    #[error("transform is rank deficient (singular value ratio {ratio:e})")]
    RankDeficient { ratio: f64 },

    #[error("invalid transform shape {rows}x{cols}: need 1 <= m < n")]
    InvalidShape { rows: usize, cols: usize },

    #[error("alignment is undefined: centered similarity matrix has norm {norm:e}")]
    DegenerateAlignment { norm: f64 },

    #[error("class {class} has {size} sample(s); at least 2 are required")]
    InsufficientClassSize { class: usize, size: usize },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("Sylvester solve failed: {0}")]
    Sylvester(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for failures of the numerical pipeline as opposed to bad input or configuration.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite { .. }
                | Error::IllConditioned { .. }
                | Error::NoConvergence(_)
                | Error::RankDeficient { .. }
                | Error::DegenerateAlignment { .. }
                | Error::Sylvester(_)
        )
    }

    pub(crate) fn dims(expected: impl ToString, found: impl ToString) -> Self {
        Error::DimMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
