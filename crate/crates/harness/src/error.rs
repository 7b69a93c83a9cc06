use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("unknown preset `{0}` (expected fig1, fig2, fig3 or fig4)")]
    UnknownPreset(String),

    #[error(transparent)]
    Solver(#[from] hetvr::Error),

    /// Every grid point for a solver diverged or failed to start.
    #[error("every grid point diverged for {solver}")]
    AllDiverged { solver: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("nothing to plot: {0}")]
    EmptyTrace(String),

    #[error("plot: {0}")]
    Plot(String),

    /// The trace's gradient-call column disagrees with the oracle counter.
    #[error("accounting mismatch for {solver}: {detail}")]
    Accounting { solver: String, detail: String },
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 for bad input, 3 when only divergence was observed.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config { .. } | HarnessError::UnknownPreset(_) => 2,
            HarnessError::AllDiverged { .. } => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
