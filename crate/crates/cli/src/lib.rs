//! Command-line pipeline over the core library and the quiz HTTP service.

pub mod commands;
pub mod quiz;

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Tablebase(#[from] blunder_core::tablebase::TablebaseError),
    #[error(transparent)]
    Extract(#[from] blunder_core::ingest::ExtractError),
    #[error(transparent)]
    Features(#[from] blunder_core::features::FeatureError),
    #[error(transparent)]
    Synth(#[from] blunder_core::synth::SynthError),
    #[error(transparent)]
    Analytics(#[from] blunder_core::analytics::AnalyticsError),
    #[error(transparent)]
    Learn(#[from] blunder_core::learn::LearnError),
    #[error(transparent)]
    Quiz(#[from] quiz::QuizError),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> CliError {
        CliError::File { path: path.display().to_string(), source }
    }

    /// Short machine-readable name of the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Input(_) => "input",
            CliError::File { .. } | CliError::Io(_) => "io",
            CliError::Tablebase(_) => "tablebase",
            CliError::Extract(_) => "extract",
            CliError::Features(_) => "features",
            CliError::Synth(_) => "synth",
            CliError::Analytics(_) => "analytics",
            CliError::Learn(_) => "learn",
            CliError::Quiz(_) => "quiz",
        }
    }
}
