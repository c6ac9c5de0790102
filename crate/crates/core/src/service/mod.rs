//! HTTP query service: ad-hoc classification, the model registry and
//! read access to persisted runs.

mod http;
mod registry;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

pub use http::{router, serve};
pub use registry::{EntryStatus, ModelRegistry, ModelRegistryEntry};

use crate::corpus::LabelSchema;
use crate::llm::{render_prompt, Backend, BackendConfig, Exemplar, PromptTemplate, ResponseCache};
use crate::parser::{parse_response, ClassificationOutcome, ParserRules, Verdict};
use crate::runner::{compare_reports, list_runs, load_run, ModelComparison, RunError, RunSummary};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("backend failed: {}", .0.evidence)]
    Upstream(Box<ClassifyResponse>),
    #[error("{0}")]
    Unauthorized(String),
    #[error("{0}")]
    Internal(String),
}

impl From<RunError> for ServiceError {
    fn from(e: RunError) -> Self {
        match e {
            RunError::UnknownRun(id) => ServiceError::NotFound(format!("no run `{id}`")),
            other => ServiceError::Internal(other.to_string()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Where `tcls run` writes run directories.
    pub runs_dir: PathBuf,
    pub registry_path: PathBuf,
    pub cache_dir: PathBuf,
    /// Relative replay paths in registered backends resolve here.
    pub base_dir: PathBuf,
    /// Static UI bundle served at `/`.
    pub ui_dir: Option<PathBuf>,
    /// When set, `/v1` requests need `Authorization: Bearer <token>`.
    pub auth_token: Option<String>,
    pub parser_rules: ParserRules,
    pub template: PromptTemplate,
}

impl ServiceConfig {
    /// Registry and cache inside `runs_dir`, matching where runs keep their cache.
    pub fn new(runs_dir: impl Into<PathBuf>) -> Self {
        let runs_dir = runs_dir.into();
        Self {
            registry_path: runs_dir.join("registry.jsonl"),
            cache_dir: runs_dir.join("cache"),
            base_dir: PathBuf::from("."),
            runs_dir,
            ui_dir: None,
            auth_token: None,
            parser_rules: ParserRules::default(),
            template: PromptTemplate::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestExemplar {
    pub text: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyRequest {
    pub text: String,
    /// Ad-hoc label set; takes precedence over `schema`.
    #[serde(default)]
    pub labels: Option<Vec<String>>,
    /// Built-in schema id.
    #[serde(default)]
    pub schema: Option<String>,
    pub model: String,
    /// Replaces the service's default template for this request.
    #[serde(default)]
    pub template: Option<PromptTemplate>,
    /// Few-shot examples; absent or empty means zero-shot.
    #[serde(default)]
    pub exemplars: Option<Vec<RequestExemplar>>,
    #[serde(default)]
    pub dataset_name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyResponse {
    #[serde(flatten)]
    pub verdict: Verdict,
    pub evidence: String,
    pub raw: String,
    pub latency_ms: u64,
    pub from_cache: bool,
    pub model_id: String,
    pub model_version: String,
    pub request_digest: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegisterRequest {
    pub model_id: String,
    pub version: String,
    pub backend: BackendConfig,
}

/// Shared state behind the HTTP handlers.
pub struct Service {
    config: ServiceConfig,
    registry: Mutex<ModelRegistry>,
    backends: Mutex<HashMap<(String, String), Backend>>,
    cache: ResponseCache,
}

impl std::fmt::Debug for Service {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Service").field("config", &self.config).finish_non_exhaustive()
    }
}

impl Service {
    pub fn new(config: ServiceConfig) -> Result<Self, ServiceError> {
        let registry = ModelRegistry::open(&config.registry_path)?;
        let cache = ResponseCache::open(&config.cache_dir).map_err(|e| ServiceError::Internal(e.to_string()))?;
        config.template.validate().map_err(|e| ServiceError::Internal(e.to_string()))?;
        Ok(Self { config, registry: Mutex::new(registry), backends: Mutex::new(HashMap::new()), cache })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn register_model_version(&self, req: RegisterRequest) -> Result<ModelRegistryEntry, ServiceError> {
        self.registry.lock().expect("registry lock").register(&req.model_id, &req.version, req.backend)
    }

    pub fn list_models(&self) -> Vec<ModelRegistryEntry> {
        self.registry.lock().expect("registry lock").list().to_vec()
    }

    pub fn list_runs(&self) -> Result<Vec<RunSummary>, ServiceError> {
        Ok(list_runs(&self.config.runs_dir)?)
    }

    /// `report.json` of the run, byte for byte.
    pub fn get_run(&self, run_id: &str) -> Result<String, ServiceError> {
        Ok(load_run(&self.config.runs_dir, run_id)?.report_json)
    }

    pub fn compare(&self, base: &str, variant: &str) -> Result<Vec<ModelComparison>, ServiceError> {
        let a = load_run(&self.config.runs_dir, base)?;
        let b = load_run(&self.config.runs_dir, variant)?;
        Ok(compare_reports(&a.report, &b.report)?)
    }

    fn backend_for(&self, entry: &ModelRegistryEntry) -> Result<Backend, ServiceError> {
        let key = (entry.model_id.clone(), entry.version.clone());
        let mut map = self.backends.lock().expect("backend map lock");
        if let Some(b) = map.get(&key) {
            return Ok(b.clone());
        }
        let b = Backend::from_config(&entry.backend, &self.config.base_dir)
            .map_err(|e| ServiceError::Internal(e.to_string()))?;
        map.insert(key, b.clone());
        Ok(b)
    }

    /// Renders, sends (cache first) and parses one request. Blocks on the backend.
    pub fn classify(&self, req: &ClassifyRequest) -> Result<ClassifyResponse, ServiceError> {
        if req.text.trim().is_empty() {
            return Err(ServiceError::BadRequest("text is empty".into()));
        }
        let schema = match (&req.labels, &req.schema) {
            (Some(labels), _) => {
                LabelSchema::transient(labels).map_err(|e| ServiceError::BadRequest(format!("labels: {e}")))?
            }
            (None, Some(id)) => {
                LabelSchema::builtin(id).ok_or_else(|| ServiceError::BadRequest(format!("unknown schema `{id}`")))?
            }
            (None, None) => return Err(ServiceError::BadRequest("give labels or a schema id".into())),
        };
        let entry = self
            .registry
            .lock()
            .expect("registry lock")
            .active(&req.model)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("no active model `{}`", req.model)))?;
        let template = req.template.as_ref().unwrap_or(&self.config.template);
        let exemplars = req
            .exemplars
            .iter()
            .flatten()
            .enumerate()
            .map(|(i, ex)| match schema.resolve(&ex.label) {
                Some(l) => Ok(Exemplar { id: format!("req-{i}"), text: ex.text.clone(), label: l.to_owned() }),
                None => Err(ServiceError::BadRequest(format!("exemplar label `{}` is not in the label set", ex.label))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let dataset_name = req.dataset_name.as_deref().unwrap_or("user-provided");
        let prompt = render_prompt(template, &req.text, &schema, dataset_name, Some(&exemplars))
            .map_err(|e| ServiceError::BadRequest(e.to_string()))?;

        let backend = self.backend_for(&entry)?;
        let respond = |o: ClassificationOutcome, latency_ms, from_cache, digest| ClassifyResponse {
            verdict: o.verdict,
            evidence: o.evidence,
            raw: o.raw,
            latency_ms,
            from_cache,
            model_id: entry.model_id.clone(),
            model_version: entry.version.clone(),
            request_digest: digest,
        };
        match backend.complete(&prompt, &self.cache) {
            Ok(resp) => {
                let outcome = parse_response(&resp.text, &schema, &self.config.parser_rules);
                Ok(respond(outcome, resp.latency_ms, resp.from_cache, Some(resp.request_digest)))
            }
            Err(e) => {
                let digest = backend.request_key(&prompt);
                Err(ServiceError::Upstream(Box::new(respond(
                    ClassificationOutcome::transport_failure(e.to_string()),
                    0,
                    false,
                    Some(digest),
                ))))
            }
        }
    }
}
