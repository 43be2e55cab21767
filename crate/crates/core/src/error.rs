use thiserror::Error;

/// Errors produced anywhere in the training, planning and evaluation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("rejected input: {0}")]
    RejectedInput(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("training diverged at {location}: {reason}")]
    TrainingDiverged { location: String, reason: String },

    #[error("simulation diverged in {env}: non-finite state after step {step}")]
    SimulationDiverged { env: String, step: usize },

    #[error("degenerate expert on {env}: mean return {mean_return:.3} below threshold {threshold:.3}")]
    DegenerateExpert {
        env: String,
        mean_return: f64,
        threshold: f64,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("planning aborted: {0}")]
    PlanningAborted(String),

    #[error("missing artifact: {}", .0.display())]
    MissingArtifact(std::path::PathBuf),

    #[error("malformed file {}: {reason}", path.display())]
    Format {
        path: std::path::PathBuf,
        reason: String,
    },

    #[error("nothing to plot in {}", .0.display())]
    NothingToPlot(std::path::PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn diverged(location: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::TrainingDiverged {
            location: location.into(),
            reason: reason.into(),
        }
    }

    /// Prefixes the location of a training divergence, e.g. with an iteration index.
    pub fn within(self, outer: impl std::fmt::Display) -> Self {
        match self {
            Error::TrainingDiverged { location, reason } => Error::TrainingDiverged {
                location: format!("{outer}, {location}"),
                reason,
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
