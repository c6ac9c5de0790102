use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::report::{render_report, ReportFormat};
use super::{RunError, RunReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelTiming {
    pub dataset: String,
    pub model_id: String,
    pub millis: u64,
}

/// Per-execution facts kept out of the report so reports stay reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub run_id: String,
    pub created_at: String,
    pub config_digest: String,
    pub partial: bool,
    pub wall_clock_ms: u64,
    /// Requests that reached a transport; cache hits are not counted.
    pub transport_calls: u64,
    pub timings: Vec<ModelTiming>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub created_at: String,
    pub config_digest: String,
    pub partial: bool,
    pub datasets: Vec<String>,
    pub models: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct StoredRun {
    pub dir: PathBuf,
    pub meta: RunMeta,
    pub report: RunReport,
    /// `report.json` exactly as stored.
    pub report_json: String,
}

pub(crate) const REPORT_FILES: [(&str, ReportFormat); 3] = [
    ("report.json", ReportFormat::Structured),
    ("report.md", ReportFormat::Markdown),
    ("report.csv", ReportFormat::Csv),
];

fn write(path: &Path, text: &str) -> Result<(), RunError> {
    std::fs::write(path, text).map_err(|e| RunError::Io { path: path.to_path_buf(), source: e })
}

pub(crate) fn write_run(
    out_root: &Path,
    config_text: &str,
    report: &RunReport,
    mut meta: RunMeta,
    created_at: DateTime<Utc>,
) -> Result<(PathBuf, RunMeta), RunError> {
    std::fs::create_dir_all(out_root).map_err(|e| RunError::Io { path: out_root.to_path_buf(), source: e })?;
    let stem = format!("run-{}-{}", created_at.format("%Y%m%dT%H%M%S%3fZ"), &report.config_digest[..8]);
    let mut run_id = stem.clone();
    let mut n = 1;
    let dir = loop {
        let dir = out_root.join(&run_id);
        match std::fs::create_dir(&dir) {
            Ok(()) => break dir,
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                n += 1;
                run_id = format!("{stem}-{n}");
            }
            Err(e) => return Err(RunError::Io { path: dir, source: e }),
        }
    };
    meta.run_id = run_id;
    write(&dir.join("config.toml"), config_text)?;
    for (name, format) in REPORT_FILES {
        write(&dir.join(name), &render_report(report, format)?)?;
    }
    let meta_json =
        serde_json::to_string_pretty(&meta).map_err(|e| RunError::Json("meta.json".into(), e.to_string()))?;
    write(&dir.join("meta.json"), &(meta_json + "\n"))?;
    Ok((dir, meta))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<(T, String), RunError> {
    let text = std::fs::read_to_string(path).map_err(|e| RunError::Io { path: path.to_path_buf(), source: e })?;
    let value = serde_json::from_str(&text).map_err(|e| RunError::Json(path.display().to_string(), e.to_string()))?;
    Ok((value, text))
}

/// Reads a run directory written by [`crate::runner::execute_run`].
pub fn load_run_dir(dir: &Path) -> Result<StoredRun, RunError> {
    let (meta, _) = read_json(&dir.join("meta.json"))?;
    let (report, report_json) = read_json(&dir.join("report.json"))?;
    Ok(StoredRun { dir: dir.to_path_buf(), meta, report, report_json })
}

/// Looks up `run_id` under `out_root`.
pub fn load_run(out_root: &Path, run_id: &str) -> Result<StoredRun, RunError> {
    let valid = run_id.starts_with("run-") && run_id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-');
    let dir = out_root.join(run_id);
    if !valid || !dir.join("meta.json").is_file() {
        return Err(RunError::UnknownRun(run_id.to_owned()));
    }
    load_run_dir(&dir)
}

/// Runs under `out_root`, newest first.
pub fn list_runs(out_root: &Path) -> Result<Vec<RunSummary>, RunError> {
    let entries = match std::fs::read_dir(out_root) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(RunError::Io { path: out_root.to_path_buf(), source: e }),
    };
    let mut out = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| RunError::Io { path: out_root.to_path_buf(), source: e })?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if !name.starts_with("run-") || !entry.path().join("meta.json").is_file() {
            continue;
        }
        let run = load_run_dir(&entry.path())?;
        let mut models: Vec<String> = Vec::new();
        for m in run.report.datasets.iter().flat_map(|d| &d.models) {
            if !models.contains(&m.model_id) {
                models.push(m.model_id.clone());
            }
        }
        out.push(RunSummary {
            run_id: run.meta.run_id,
            created_at: run.meta.created_at,
            config_digest: run.meta.config_digest,
            partial: run.meta.partial,
            datasets: run.report.datasets.iter().map(|d| d.id.clone()).collect(),
            models,
        });
    }
    out.sort_by(|a, b| b.created_at.cmp(&a.created_at).then_with(|| b.run_id.cmp(&a.run_id)));
    Ok(out)
}
