use thiserror::Error;

use crate::sdp::{Diagnostic, Status};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes of matrices or vectors do not agree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A precondition of an operation was violated by the caller.
    #[error("contract violation: {0}")]
    Contract(String),

    /// The stacked regressor matrix does not have full row rank.
    #[error("underdetermined data: regressor rank {rank} < {required} (need full row rank)")]
    Underdetermined { rank: usize, required: usize },

    /// A closed-loop response cannot be realized as a controller.
    #[error("invalid response: {0}")]
    InvalidResponse(String),

    #[error("closed loop is unstable (spectral radius {0:.6})")]
    Unstable(f64),

    /// A multiplier and an uncertainty matrix are both decision variables.
    #[error("bilinear constraint: the multiplier must be fixed when the uncertainty matrix depends on decision variables")]
    Bilinear,

    #[error("malformed conic program ({} diagnostics): {}", .0.len(), first_diagnostic(.0))]
    Validation(Vec<Diagnostic>),

    /// The solver proved (or could not rule out) infeasibility.
    #[error("{stage}: infeasible ({detail})")]
    Infeasible { stage: String, detail: String },

    /// The solver did not reach the requested accuracy.
    #[error("{stage}: solver finished with status {status:?} ({detail})")]
    Solver {
        stage: String,
        status: Status,
        detail: String,
    },

    #[error("csv: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn first_diagnostic(d: &[Diagnostic]) -> String {
    d.first().map(|d| d.to_string()).unwrap_or_default()
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

pub(crate) fn ensure_dims(cond: bool, what: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Dimension(what()))
    }
}
