use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use super::store::{write_run, ModelTiming, RunMeta};
use super::{DatasetConfig, DatasetResult, ModelKind, ModelResult, RunConfig, RunError, RunReport, TraceEntry};
use crate::baselines::{BaselinePipeline, BaselineSpec};
use crate::corpus::{
    default_sentiment_merge, load_dataset, load_label_mapping, merge_labels, stratified_sample, Dataset, DatasetFormat,
    LabelSchema, LoadOptions, Split,
};
use crate::digest::sha256_hex;
use crate::llm::{
    render_prompt, select_exemplars, Backend, LlmError, PromptTemplate, RawResponse, RenderedPrompt, ResponseCache,
    Strategy,
};
use crate::metrics::{compare_runs, tally, ConfusionMatrix, MetricSet, UEStats};
use crate::parser::{parse_response, ClassificationOutcome, ParserRules};

/// A finished run: the report, its bookkeeping and where it was written.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub meta: RunMeta,
    pub run_dir: PathBuf,
}

pub(super) struct Prepared {
    pub schema: LabelSchema,
    pub train: Option<Dataset>,
    pub test: Dataset,
}

impl DatasetConfig {
    /// Loads, relabels and samples one split. `None` when the split has no file.
    pub fn load(&self, base_dir: &Path, split: Split) -> Result<Option<Dataset>, RunError> {
        let (path, cap) = match split {
            Split::Train => match &self.train {
                Some(p) => (p, self.train_cap),
                None => return Ok(None),
            },
            Split::Test => (&self.test, self.test_cap),
        };
        let err = |e| RunError::Dataset(self.id.clone(), e);
        let format = DatasetFormat::resolve_spec(&self.format, base_dir).map_err(err)?;
        let schema = LabelSchema::resolve_spec(&self.schema, base_dir).map_err(err)?;
        let raw_schema = match &self.source_schema {
            Some(s) => LabelSchema::resolve_spec(s, base_dir).map_err(err)?,
            None => schema.clone(),
        };
        let opts = LoadOptions { split, skip_malformed: self.skip_malformed };
        let ds = load_dataset(&base_dir.join(path), &format, &raw_schema, &opts).map_err(err)?;
        let ds = match self.mapping.as_deref() {
            Some("sentiment5to3") => merge_labels(&ds, &default_sentiment_merge(), &schema).map_err(err)?,
            Some(m) => merge_labels(&ds, &load_label_mapping(&base_dir.join(m)).map_err(err)?, &schema).map_err(err)?,
            None => ds,
        };
        stratified_sample(&ds, cap, self.seed).map(Some).map_err(err)
    }
}

pub(super) fn prepare(cfg: &RunConfig, d: &DatasetConfig) -> Result<Prepared, RunError> {
    let test = d.load(&cfg.base_dir, Split::Test)?.expect("test split always has a file");
    Ok(Prepared { schema: test.schema().clone(), train: d.load(&cfg.base_dir, Split::Train)?, test })
}

fn finish(
    mut row: ModelResult,
    data: &Prepared,
    dataset_id: &str,
    outcomes: &[ClassificationOutcome],
    cfg: &RunConfig,
) -> Result<ModelResult, RunError> {
    if !row.complete {
        return Ok(row);
    }
    let gold: Vec<&str> = data.test.examples().iter().map(|e| e.gold.as_str()).collect();
    let (cm, ue) = tally(&gold, outcomes, &data.schema)?;
    row.metrics = Some(MetricSet::compute(dataset_id, data.schema.id(), &cm, &ue, cfg.f1_average)?);
    row.confusion = cm;
    row.ue = ue;
    Ok(row)
}

fn empty_row(id: &str, display: String, kind: ModelKind, schema: &LabelSchema) -> ModelResult {
    ModelResult {
        model_id: id.to_owned(),
        display,
        kind,
        model_ref: None,
        base: None,
        complete: true,
        failure: None,
        metrics: None,
        confusion: ConfusionMatrix::empty(schema),
        ue: UEStats { uncertain: 0, error: 0, n: 0 },
        delta: None,
        trace: Vec::new(),
    }
}

/// Sends every prompt through `backend` with at most `workers` requests in
/// flight. Results come back in input order. After a non-retryable failure no
/// new requests start and the unsent slots stay `None`.
pub(super) fn fan_out(
    backend: &Backend,
    cache: &ResponseCache,
    prompts: &[RenderedPrompt],
    workers: usize,
) -> Vec<Option<Result<RawResponse, LlmError>>> {
    let mut slots: Vec<Option<Result<RawResponse, LlmError>>> = Vec::new();
    slots.resize_with(prompts.len(), || None);
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let (tx, rx) = mpsc::channel();
    std::thread::scope(|s| {
        for _ in 0..workers.min(prompts.len()).max(1) {
            let tx = tx.clone();
            let (next, stop) = (&next, &stop);
            s.spawn(move || loop {
                if stop.load(Ordering::Relaxed) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(prompt) = prompts.get(i) else { break };
                let r = backend.complete(prompt, cache);
                if matches!(&r, Err(e) if !matches!(e, LlmError::Exhausted { .. })) {
                    stop.store(true, Ordering::Relaxed);
                }
                if tx.send((i, r)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (i, r) in rx {
            slots[i] = Some(r);
        }
    });
    slots
}

pub(super) fn run_backend(
    backend: &Backend,
    cache: &ResponseCache,
    cfg: &RunConfig,
    d: &DatasetConfig,
    data: &Prepared,
    template: &PromptTemplate,
    rules: &ParserRules,
) -> Result<ModelResult, RunError> {
    let bc = backend.config();
    let mut row = empty_row(&bc.id, bc.display(), ModelKind::Llm, &data.schema);
    row.model_ref = Some(bc.model_ref());
    row.base = bc.base.clone();

    let exemplars = match &bc.strategy {
        Strategy::FewShot { k_per_class, seed } => {
            let train = data.train.as_ref().expect("validated: few-shot needs train");
            match select_exemplars(train, *k_per_class, *seed) {
                Ok(ex) => Some(ex),
                Err(e) => {
                    row.complete = false;
                    row.failure = Some(e.to_string());
                    return Ok(row);
                }
            }
        }
        _ => None,
    };
    let prompts = data
        .test
        .examples()
        .iter()
        .map(|ex| render_prompt(template, &ex.text, &data.schema, d.display_name(), exemplars.as_deref()))
        .collect::<Result<Vec<_>, _>>()?;

    let results = fan_out(backend, cache, &prompts, cfg.concurrency);

    let mut outcomes = Vec::with_capacity(results.len());
    for (ex, (prompt, slot)) in data.test.examples().iter().zip(prompts.iter().zip(results)) {
        let (outcome, response_digest) = match slot {
            Some(Ok(resp)) => (parse_response(&resp.text, &data.schema, rules), Some(sha256_hex(resp.text.as_bytes()))),
            Some(Err(e @ LlmError::Exhausted { .. })) => {
                (ClassificationOutcome::transport_failure(e.to_string()), None)
            }
            Some(Err(e)) => {
                if row.failure.is_none() {
                    row.failure = Some(e.to_string());
                }
                row.complete = false;
                continue;
            }
            None => {
                row.complete = false;
                continue;
            }
        };
        row.trace.push(TraceEntry {
            id: ex.id.clone(),
            gold: ex.gold.clone(),
            request_digest: Some(backend.request_key(prompt)),
            response_digest,
            outcome: outcome.tag().to_owned(),
            evidence: outcome.evidence.clone(),
        });
        outcomes.push(outcome);
    }
    finish(row, data, &d.id, &outcomes, cfg)
}

fn run_baseline(
    spec: &BaselineSpec,
    cfg: &RunConfig,
    d: &DatasetConfig,
    data: &Prepared,
) -> Result<ModelResult, RunError> {
    let kind = spec.kind();
    let mut row = empty_row(
        &kind.display_name().to_lowercase(),
        kind.display_name().to_owned(),
        ModelKind::Baseline,
        &data.schema,
    );
    let train = data.train.as_ref().expect("validated: baselines need train");
    let pipeline = match BaselinePipeline::fit(train, spec, &cfg.vectorizer) {
        Ok(p) => p,
        Err(e) => {
            row.complete = false;
            row.failure = Some(e.to_string());
            return Ok(row);
        }
    };
    let mut outcomes = Vec::with_capacity(data.test.len());
    for ex in data.test.examples() {
        let label = pipeline.predict_text(&ex.text)?.to_owned();
        row.trace.push(TraceEntry {
            id: ex.id.clone(),
            gold: ex.gold.clone(),
            request_digest: None,
            response_digest: None,
            outcome: label.clone(),
            evidence: "baseline".into(),
        });
        outcomes.push(ClassificationOutcome {
            verdict: crate::parser::Verdict::Label { label: label.clone() },
            evidence: "baseline".into(),
            raw: label,
        });
    }
    finish(row, data, &d.id, &outcomes, cfg)
}

/// Runs every configured model on every dataset and writes the run directory.
///
/// Responses are cached under `<output_dir>/cache`, shared by all runs with the
/// same output directory, so repeating or resuming a run re-sends nothing.
pub fn execute_run(cfg: &RunConfig) -> Result<RunOutput, RunError> {
    cfg.validate()?;
    let started = Instant::now();
    let created_at = chrono::Utc::now();
    let rules = cfg.parser_rules()?;
    let template = cfg.prompt_template()?;
    let out_root = cfg.output_path();
    let cache = ResponseCache::open(out_root.join("cache"))?;
    let backends =
        cfg.backends.iter().map(|b| Backend::from_config(b, &cfg.base_dir)).collect::<Result<Vec<_>, _>>()?;

    let mut timings = Vec::new();
    let mut datasets = Vec::with_capacity(cfg.datasets.len());
    for d in &cfg.datasets {
        let data = prepare(cfg, d)?;
        tracing::info!(dataset = %d.id, test = data.test.len(), "dataset ready");
        let mut models = Vec::new();
        for b in &backends {
            let t = Instant::now();
            models.push(run_backend(b, &cache, cfg, d, &data, &template, &rules)?);
            timings.push(ModelTiming {
                dataset: d.id.clone(),
                model_id: b.config().id.clone(),
                millis: t.elapsed().as_millis() as u64,
            });
        }
        for spec in &cfg.baselines {
            let t = Instant::now();
            let row = run_baseline(spec, cfg, d, &data)?;
            timings.push(ModelTiming {
                dataset: d.id.clone(),
                model_id: row.model_id.clone(),
                millis: t.elapsed().as_millis() as u64,
            });
            models.push(row);
        }
        for i in 0..models.len() {
            let Some(base_id) = models[i].base.clone() else { continue };
            let base = models.iter().find(|m| m.model_id == base_id).and_then(|m| m.metrics.as_ref());
            if let (Some(base), Some(variant)) = (base, models[i].metrics.as_ref()) {
                models[i].delta = Some(compare_runs(base, variant)?);
            }
        }
        datasets.push(DatasetResult {
            id: d.id.clone(),
            name: d.display_name().to_owned(),
            schema_id: data.schema.id().to_owned(),
            train_size: data.train.as_ref().map_or(0, Dataset::len),
            test_size: data.test.len(),
            reference: d.reference.clone(),
            models,
        });
    }

    let report = RunReport {
        config_digest: sha256_hex(cfg.source_text.as_bytes()),
        partial: datasets.iter().flat_map(|d| &d.models).any(|m| !m.complete),
        f1_average: cfg.f1_average,
        datasets,
    };
    let meta = RunMeta {
        run_id: String::new(),
        created_at: created_at.to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
        config_digest: report.config_digest.clone(),
        partial: report.partial,
        wall_clock_ms: started.elapsed().as_millis() as u64,
        transport_calls: backends.iter().map(Backend::transport_calls).sum(),
        timings,
    };
    let (run_dir, meta) = write_run(&out_root, &cfg.source_text, &report, meta, created_at)?;
    Ok(RunOutput { report, meta, run_dir })
}
