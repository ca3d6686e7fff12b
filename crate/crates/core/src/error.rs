use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by topology generation, the protocol state machines,
/// the analysis oracle and configuration handling.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid arguments or a violated precondition.
    #[error("usage error: {0}")]
    Usage(String),

    /// Malformed config or edge-list input. `line` is 1-based.
    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("topology generation failed: {0}")]
    Generation(String),

    /// A node's normalization sum fell to or below the division guard.
    #[error("node {node} is isolated: normalization sum {sigma:e} is not above {guard:e}")]
    Isolated { node: usize, sigma: f64, guard: f64 },

    /// A node's denominator state is not strictly positive.
    #[error("node {node} has degenerate denominator state {x_tilde:e}")]
    Degenerate { node: usize, x_tilde: f64 },

    /// The matrix is not primitive (e.g. a bipartite support without self-weights).
    #[error("matrix is not primitive: support is periodic")]
    Periodic,

    #[error("power iteration did not reach residual {target:e} after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        target: f64,
    },

    #[error("non-finite state at node {node}")]
    NonFinite { node: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by user input (bad config, bad arguments).
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Usage(_) | Error::Parse { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
