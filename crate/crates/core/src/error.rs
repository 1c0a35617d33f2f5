use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad input data or configuration.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("power iteration did not converge after {iterations} iterations (last L1 residual {residual:e}){}", period_note(*.period))]
    NonConvergence {
        iterations: usize,
        residual: f64,
        period: usize,
    },

    #[error("no cluster switches found in any walk; the switch profile is empty (try a higher temperature, more steps, or a vocabulary with more category structure)")]
    EmptyProfile,

    #[error("no patches with a defined final IRT")]
    NoQualifyingPatches,

    #[error("embedding service: {0}")]
    Service(String),

    #[error("embedding service failed after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: usize, last: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn period_note(period: usize) -> String {
    if period > 1 {
        format!("; chain is periodic with period {period}")
    } else {
        String::new()
    }
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// Process exit code: 1 validation, 2 runtime/numeric, 3 I/O or network.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::Parse { .. } => 1,
            Error::Numeric(_)
            | Error::NonConvergence { .. }
            | Error::EmptyProfile
            | Error::NoQualifyingPatches => 2,
            Error::Service(_) | Error::RetriesExhausted { .. } | Error::Io { .. } => 3,
        }
    }
}
