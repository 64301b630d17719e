use std::path::PathBuf;

use causa_core::assumptions::AssumptionError;
use causa_core::dag::DagError;
use causa_core::dataset::DatasetError;
use causa_core::estimators::EstimateError;
use causa_core::netgraph::GraphError;
use causa_core::refutation::RefuteError;
use causa_core::rgnn::RgnnError;
use thiserror::Error;

/// Anything that ends a command with exit status 1.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{}: {source}", path.display())]
    Toml { path: PathBuf, source: toml::de::Error },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{}: {source}", path.display())]
    Dataset { path: PathBuf, source: DatasetError },
    #[error("wrangling: {0}")]
    Wrangle(DatasetError),
    #[error("causal graph: {0}")]
    Dag(#[from] DagError),
    #[error("estimation: {0}")]
    Estimate(#[from] EstimateError),
    #[error("diagnostics: {0}")]
    Assumption(#[from] AssumptionError),
    #[error("refutation: {0}")]
    Refute(#[from] RefuteError),
    #[error("graph: {0}")]
    Graph(#[from] GraphError),
    #[error("rgnn: {0}")]
    Rgnn(#[from] RgnnError),
    #[error("writing output: {0}")]
    Output(std::io::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}
