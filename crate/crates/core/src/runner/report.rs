use std::fmt::Write as _;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{ModelKind, ModelResult, RunError, RunReport};
use crate::metrics::{compare_runs, format_metric, DeltaReport, F1Average};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Markdown,
    Csv,
    Structured,
}

impl FromStr for ReportFormat {
    type Err = RunError;

    fn from_str(s: &str) -> Result<Self, RunError> {
        match s.to_ascii_lowercase().as_str() {
            "md" | "markdown" => Ok(Self::Markdown),
            "csv" => Ok(Self::Csv),
            "json" | "structured" => Ok(Self::Structured),
            other => Err(RunError::UnknownFormat(other.to_owned())),
        }
    }
}

/// A published result shown next to computed rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceRow {
    pub dataset: String,
    pub model: String,
    pub group: String,
    pub acc: f64,
    pub f1: f64,
}

#[derive(Deserialize)]
struct ReferenceFile {
    rows: Vec<ReferenceRow>,
}

/// Bundled literature rows.
pub fn reference_rows() -> &'static [ReferenceRow] {
    static ROWS: OnceLock<Vec<ReferenceRow>> = OnceLock::new();
    ROWS.get_or_init(|| {
        toml::from_str::<ReferenceFile>(include_str!("../../data/reference_rows.toml"))
            .expect("bundled reference rows parse")
            .rows
    })
}

pub fn render_report(r: &RunReport, format: ReportFormat) -> Result<String, RunError> {
    match format {
        ReportFormat::Structured => serde_json::to_string_pretty(r)
            .map(|s| s + "\n")
            .map_err(|e| RunError::Json("report".into(), e.to_string())),
        ReportFormat::Markdown => Ok(markdown(r)),
        ReportFormat::Csv => csv_report(r),
    }
}

fn cell(value: f64, delta: Option<&crate::metrics::Delta>) -> String {
    match delta {
        Some(d) => format!("{} {}", format_metric(value), d.display),
        None => format_metric(value),
    }
}

fn markdown(r: &RunReport) -> String {
    let mut s = String::from("# Benchmark report\n\n");
    let _ = writeln!(s, "Config digest: `{}`  ", r.config_digest);
    let avg = match r.f1_average {
        F1Average::Macro => "macro",
        F1Average::Weighted => "weighted",
    };
    let _ = writeln!(s, "F1: {avg} average over classes  ");
    let _ = writeln!(s, "Status: {}", if r.partial { "partial" } else { "complete" });
    for d in &r.datasets {
        let _ = write!(s, "\n## {} ({}, test n={}", d.name, d.schema_id, d.test_size);
        if d.train_size > 0 {
            let _ = write!(s, ", train n={}", d.train_size);
        }
        s.push_str(")\n\n| Model | ACC(↑) | F1(↑) | U/E(↓) |\n| --- | --- | --- | --- |\n");
        let refs: Vec<&ReferenceRow> = match &d.reference {
            Some(key) => reference_rows().iter().filter(|row| &row.dataset == key).collect(),
            None => Vec::new(),
        };
        for row in &refs {
            let _ = writeln!(s, "| {}† | {} | {} | - |", row.model, format_metric(row.acc), format_metric(row.f1));
        }
        for m in &d.models {
            let Some(ms) = &m.metrics else {
                let _ = writeln!(s, "| {} | incomplete | incomplete | incomplete |", m.display);
                continue;
            };
            let delta = m.delta.as_ref();
            let ue = match m.kind {
                ModelKind::Llm => cell(ms.ue, delta.map(|d| &d.ue)),
                ModelKind::Baseline => "-".into(),
            };
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} |",
                m.display,
                cell(ms.acc, delta.map(|d| &d.acc)),
                cell(ms.f1, delta.map(|d| &d.f1)),
                ue
            );
        }
        if !refs.is_empty() {
            s.push_str("\n† Published value for the original dataset, not computed by this run.\n");
        }
        for m in d.models.iter().filter(|m| !m.complete) {
            let _ =
                writeln!(s, "\n`{}` did not finish: {}", m.model_id, m.failure.as_deref().unwrap_or("stopped early"));
        }
    }
    s
}

pub(crate) const CSV_HEADER: [&str; 14] = [
    "dataset",
    "model",
    "display",
    "kind",
    "n",
    "acc",
    "f1",
    "ue",
    "uncertain",
    "error",
    "complete",
    "acc_delta",
    "f1_delta",
    "ue_delta",
];

fn csv_report(r: &RunReport) -> Result<String, RunError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| RunError::Json("report.csv".into(), e.to_string());
    w.write_record(CSV_HEADER).map_err(fail)?;
    let num = |x: f64| x.to_string();
    for d in &r.datasets {
        if let Some(key) = &d.reference {
            for row in reference_rows().iter().filter(|row| &row.dataset == key) {
                w.write_record([
                    d.id.as_str(),
                    &row.model,
                    &format!("{}†", row.model),
                    "reference",
                    "",
                    &num(row.acc),
                    &num(row.f1),
                    "",
                    "",
                    "",
                    "true",
                    "",
                    "",
                    "",
                ])
                .map_err(fail)?;
            }
        }
        for m in &d.models {
            let kind = match m.kind {
                ModelKind::Llm => "llm",
                ModelKind::Baseline => "baseline",
            };
            let (n, acc, f1, ue) = match &m.metrics {
                Some(ms) => (ms.n.to_string(), num(ms.acc), num(ms.f1), num(ms.ue)),
                None => Default::default(),
            };
            let (da, df, du) = match &m.delta {
                Some(dr) => (num(dr.acc.delta), num(dr.f1.delta), num(dr.ue.delta)),
                None => Default::default(),
            };
            w.write_record([
                d.id.as_str(),
                &m.model_id,
                &m.display,
                kind,
                &n,
                &acc,
                &f1,
                &ue,
                &m.ue.uncertain.to_string(),
                &m.ue.error.to_string(),
                if m.complete { "true" } else { "false" },
                &da,
                &df,
                &du,
            ])
            .map_err(fail)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| RunError::Json("report.csv".into(), e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
}

/// Delta of one model between two runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub dataset: String,
    pub model_id: String,
    pub display: String,
    pub delta: DeltaReport,
}

/// `b - a` for every (dataset, model) that finished in both runs.
pub fn compare_reports(a: &RunReport, b: &RunReport) -> Result<Vec<ModelComparison>, RunError> {
    let mut out = Vec::new();
    for da in &a.datasets {
        for ma in &da.models {
            let Some(mb): Option<&ModelResult> = b.model(&da.id, &ma.model_id) else { continue };
            if let (Some(x), Some(y)) = (&ma.metrics, &mb.metrics) {
                out.push(ModelComparison {
                    dataset: da.id.clone(),
                    model_id: ma.model_id.clone(),
                    display: ma.display.clone(),
                    delta: compare_runs(x, y)?,
                });
            }
        }
    }
    Ok(out)
}
