//! Benchmark runs: config loading, execution over datasets × models, run
//! artifacts and report rendering.

mod config;
mod execute;
mod report;
mod store;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use config::{load_run_config, DatasetConfig, RunConfig};
pub use execute::{execute_run, RunOutput};
pub use report::{compare_reports, reference_rows, render_report, ModelComparison, ReferenceRow, ReportFormat};
pub use store::{list_runs, load_run, load_run_dir, ModelTiming, RunMeta, RunSummary, StoredRun};

use crate::metrics::{ConfusionMatrix, DeltaReport, F1Average, MetricSet, UEStats};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config does not parse: {0}")]
    Parse(String),
    #[error("config key `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("{what} not found: {}", path.display())]
    MissingFile { what: String, path: PathBuf },
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("dataset `{0}`: {1}")]
    Dataset(String, crate::corpus::CorpusError),
    #[error("{0}")]
    Llm(#[from] crate::llm::LlmError),
    #[error("{0}")]
    Baseline(#[from] crate::baselines::BaselineError),
    #[error("{0}")]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}: {1}")]
    Json(String, String),
    #[error("no run `{0}`")]
    UnknownRun(String),
    #[error("unknown report format `{0}` (expected md, csv or json)")]
    UnknownFormat(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Llm,
    Baseline,
}

/// One classified test example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub id: String,
    pub gold: String,
    /// Cache key of the backend request; absent for baselines.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_digest: Option<String>,
    /// sha256 of the raw response text; absent for baselines.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response_digest: Option<String>,
    pub outcome: String,
    pub evidence: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResult {
    /// Backend id, or the baseline's short name.
    pub model_id: String,
    pub display: String,
    pub kind: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<String>,
    pub complete: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricSet>,
    pub confusion: ConfusionMatrix,
    pub ue: UEStats,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<DeltaReport>,
    pub trace: Vec<TraceEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetResult {
    pub id: String,
    pub name: String,
    pub schema_id: String,
    pub train_size: usize,
    pub test_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    pub models: Vec<ModelResult>,
}

/// Everything a run computed. Contains no timestamps, so identical inputs give
/// identical bytes; run id and timings live in [`RunMeta`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config_digest: String,
    pub partial: bool,
    pub f1_average: F1Average,
    pub datasets: Vec<DatasetResult>,
}

impl RunReport {
    pub fn model(&self, dataset: &str, model_id: &str) -> Option<&ModelResult> {
        self.datasets.iter().find(|d| d.id == dataset)?.models.iter().find(|m| m.model_id == model_id)
    }
}
