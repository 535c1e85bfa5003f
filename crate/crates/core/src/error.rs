//! Error type shared across the crate.

use std::fmt;
use std::io;
use std::path::PathBuf;

/// Errors reported by data ingestion, configuration validation and the
/// solver loop. Contract violations (dimension mismatches, bad indices)
/// panic instead; they indicate caller bugs, not recoverable conditions.
#[derive(Debug)]
pub enum Error {
    /// Underlying I/O failure while reading or writing a file.
    Io { path: PathBuf, source: io::Error },
    /// Malformed content in a text input; `line` is 1-based.
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    /// Invalid problem or solver configuration.
    InvalidConfig(String),
    /// A 1-D proximal solve failed to reach its tolerance.
    ProxNoConvergence { residual: f64 },
    /// Non-finite solver state, which signals a divergent configuration.
    Diverged { iteration: u64, detail: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Io { path, source } => write!(f, "{}: {}", path.display(), source),
            Error::Parse {
                path,
                line,
                message,
            } => write!(f, "{}:{}: {}", path.display(), line, message),
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {}", msg),
            Error::ProxNoConvergence { residual } => write!(
                f,
                "proximal solve did not converge (residual {:.3e})",
                residual
            ),
            Error::Diverged { iteration, detail } => write!(
                f,
                "solver state became non-finite at iteration {}: {}",
                iteration, detail
            ),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
