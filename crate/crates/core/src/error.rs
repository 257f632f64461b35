use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the pipeline. Variants carry the module that
/// produced them so CLI messages can be tagged.
#[derive(Debug, Error)]
pub enum Error {
    #[error("schema: {0}")]
    Schema(String),

    #[error("data: {0}")]
    Data(String),

    #[error("csv {path}: row {row}, column `{column}`: {message}")]
    Cell {
        path: PathBuf,
        row: usize,
        column: String,
        message: String,
    },

    #[error("models: {0}")]
    Model(String),

    #[error("perturb: {0}")]
    Perturb(String),

    #[error("explainers ({explainer}): {message}")]
    Explainer { explainer: String, message: String },

    #[error("adversarial: {0}")]
    Adversarial(String),

    #[error("experiments: {0}")]
    Experiment(String),

    #[error("config: {field}: {message}")]
    Config { field: String, message: String },

    #[error("io {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn explainer(explainer: &str, message: impl Into<String>) -> Self {
        Error::Explainer {
            explainer: explainer.to_string(),
            message: message.into(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad user input (config, schema, flags)
    /// rather than failures during a run.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::Schema(_))
    }
}
