use std::path::PathBuf;

use thiserror::Error;
use wlr_core::geometry::GeometryError;
use wlr_core::harness::HarnessError;
use wlr_core::predictor::PredictorError;
use wlr_core::scenarios::ScenarioError;
use wlr_core::threshold::ThresholdError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: schema error: {message}")]
    Schema { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("subject sets differ between conditions: only in first {only_a:?}, only in second {only_b:?}")]
    SubjectMismatch { only_a: Vec<String>, only_b: Vec<String> },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Threshold(#[from] ThresholdError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Predictor(#[from] PredictorError),
}

impl CliError {
    pub fn schema(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        CliError::Schema {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
