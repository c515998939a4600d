use std::path::PathBuf;

use pushfit::simulate::SimError;
use pushfit::stats::StatsError;
use pushfit::trialdata::TrialError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("no trials found in {}", .0.display())]
    EmptyInput(PathBuf),
    #[error("missing artifact: {}", .0.display())]
    MissingArtifact(PathBuf),
    #[error("malformed artifact {}: {message}", .path.display())]
    BadArtifact { path: PathBuf, message: String },
    #[error("nothing to plot")]
    EmptyPlot,
    #[error(transparent)]
    Trial(#[from] TrialError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into().display().to_string();
        move |source| CliError::Io { path, source }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Sim(SimError::InvalidOptions(_)) => 2,
            CliError::Io { .. } | CliError::MissingArtifact(_) | CliError::BadArtifact { .. } => 3,
            _ => 1,
        }
    }
}
