//! Shared error type for the library.
//!
//! Validation-style problems (bad shapes, unknown columns, malformed configs)
//! and numerical aborts (NaN gradients, diverged training) are kept in
//! distinct variants so callers can map them to different process exit codes.

use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A vector or matrix had the wrong length for the operation.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Invalid argument or configuration (wrong role set, bad path, …).
    #[error("validation: {0}")]
    Validation(String),

    /// The graph contains a directed cycle; `nodes` lists one offending cycle.
    #[error("graph contains a cycle: {}", nodes.join(" -> "))]
    Cycle { nodes: Vec<String> },

    /// The requested path-specific effect is not identifiable; `witness` is
    /// the recanting witness node.
    #[error("path set is not identifiable: recanting witness '{witness}'")]
    NonIdentifiable { witness: String },

    /// A referenced node or column does not exist.
    #[error("unknown name: {0}")]
    UnknownName(String),

    /// Non-finite value where a finite one is required (NaN/inf gradients,
    /// probabilities, losses). Distinct from `Validation` so callers can map
    /// it to a dedicated exit code.
    #[error("numerical abort: {0}")]
    Numeric(String),

    /// Training produced a non-finite objective; carries the epoch at which
    /// the abort happened so callers can report the last healthy state.
    #[error("training diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },

    /// External black-box adapter misbehaved (bad output, timeout, crash).
    #[error("adapter: {0}")]
    Adapter(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors that should abort with a "numerical failure" status
    /// rather than a plain validation failure.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric(_) | Error::Diverged { .. })
    }
}
