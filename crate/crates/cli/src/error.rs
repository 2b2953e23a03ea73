use std::path::PathBuf;

use spectra_core::bench::BenchError;
use spectra_core::datacube::DataError;
use spectra_core::evalmetrics::MetricError;
use spectra_core::reduction::ReductionError;
use spectra_core::scorer::ScorerError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("missing artifact {path}; run `{step}` first")]
    MissingArtifact { path: PathBuf, step: &'static str },
    #[error("{path}: {reason}")]
    BadArtifact { path: PathBuf, reason: String },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Bench(#[from] BenchError),
}

impl CliError {
    /// Short machine-readable tag printed before the message.
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::MissingArtifact { .. } | CliError::BadArtifact { .. } => "artifact",
            CliError::Data(_) => "data",
            CliError::Reduction(_) => "reduction",
            CliError::Scorer(_) => "scorer",
            CliError::Metric(_) => "metric",
            CliError::Bench(_) => "bench",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    /// One line, no embedded newlines.
    pub fn render(&self) -> String {
        let msg = self.to_string().replace('\n', " ");
        format!("error[{}]: {}", self.category(), msg.trim())
    }
}
