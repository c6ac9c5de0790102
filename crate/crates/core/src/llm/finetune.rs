use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::transport::{bearer, classify_status, ChatMessage, TransportError};
use super::{render_prompt, LlmError, PromptTemplate};
use crate::corpus::{label_distribution, Dataset, LabelCounts};
use crate::digest::sha256_hex;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FineTuneRecord {
    pub messages: Vec<ChatMessage>,
}

impl FineTuneRecord {
    pub fn assistant(&self) -> Option<&str> {
        self.messages.iter().find(|m| m.role == "assistant").map(|m| m.content.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FineTuneManifest {
    pub records: usize,
    pub schema_id: String,
    pub template_id: String,
    pub label_counts: LabelCounts,
    pub source: Option<PathBuf>,
    pub source_digest: Option<String>,
    pub file_digest: String,
}

pub fn finetune_manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// One system/user/assistant record per example. The user message is the
/// template's user text rendered for the example (the bare text with the
/// default template); the assistant message is the gold label.
pub fn export_finetune_data(
    train: &Dataset,
    template: &PromptTemplate,
    dataset_name: &str,
    out: &Path,
) -> Result<FineTuneManifest, LlmError> {
    if train.is_empty() {
        return Err(LlmError::Config("cannot export an empty dataset".into()));
    }
    let mut body = String::new();
    for ex in train.examples() {
        let prompt = render_prompt(template, &ex.text, train.schema(), dataset_name, None)?;
        let record = FineTuneRecord {
            messages: vec![
                ChatMessage { role: "system".into(), content: prompt.system },
                ChatMessage { role: "user".into(), content: prompt.user },
                ChatMessage { role: "assistant".into(), content: ex.gold.clone() },
            ],
        };
        body.push_str(&serde_json::to_string(&record).expect("record serializes"));
        body.push('\n');
    }
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| LlmError::Io(dir.display().to_string(), e))?;
    }
    std::fs::write(out, &body).map_err(|e| LlmError::Io(out.display().to_string(), e))?;
    let manifest = FineTuneManifest {
        records: train.len(),
        schema_id: train.schema().id().to_owned(),
        template_id: template.id.clone(),
        label_counts: label_distribution(train),
        source: train.provenance().source.clone(),
        source_digest: train.provenance().source_digest.clone(),
        file_digest: sha256_hex(body.as_bytes()),
    };
    let mpath = finetune_manifest_path(out);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&mpath, json).map_err(|e| LlmError::Io(mpath.display().to_string(), e))?;
    Ok(manifest)
}

pub fn read_finetune_file(path: &Path) -> Result<Vec<FineTuneRecord>, LlmError> {
    let text = std::fs::read_to_string(path).map_err(|e| LlmError::Io(path.display().to_string(), e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| LlmError::Config(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Pending,
    Running,
    Succeeded,
    Failed,
}

impl JobStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobStatus::Succeeded | JobStatus::Failed)
    }

    fn rank(self) -> u8 {
        match self {
            JobStatus::Pending => 0,
            JobStatus::Running => 1,
            JobStatus::Succeeded | JobStatus::Failed => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FineTuneJob {
    pub job_id: String,
    pub provider: String,
    pub base_model: String,
    pub status: JobStatus,
    pub training_file_digest: String,
    /// Set once the job succeeds; usable as `strategy = { type = "finetuned", model = ... }`.
    pub fine_tuned_model: Option<String>,
    pub error: Option<String>,
}

impl FineTuneJob {
    /// Moves to `next`, refusing to go backwards or leave a terminal state.
    pub fn advance(&mut self, next: JobStatus) -> Result<(), LlmError> {
        let ok = next == self.status || (!self.status.is_terminal() && next.rank() > self.status.rank());
        if !ok {
            return Err(LlmError::Job(format!(
                "job {}: illegal transition {:?} -> {next:?}",
                self.job_id, self.status
            )));
        }
        self.status = next;
        Ok(())
    }
}

pub trait FineTuneProvider: Send + Sync {
    fn name(&self) -> &str;
    fn submit(&self, base_model: &str, training_file: &[u8]) -> Result<FineTuneJob, LlmError>;
    /// Current provider-side view of `job`.
    fn poll(&self, job: &FineTuneJob) -> Result<FineTuneJob, LlmError>;
}

/// Jobs persisted as one JSON array, rewritten on every change.
#[derive(Debug, Clone)]
pub struct JobStore {
    path: PathBuf,
}

impl JobStore {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into() }
    }

    pub fn load(&self) -> Result<Vec<FineTuneJob>, LlmError> {
        match std::fs::read(&self.path) {
            Ok(bytes) => {
                serde_json::from_slice(&bytes).map_err(|e| LlmError::Job(format!("{}: {e}", self.path.display())))
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
            Err(e) => Err(LlmError::Io(self.path.display().to_string(), e)),
        }
    }

    pub fn get(&self, job_id: &str) -> Result<Option<FineTuneJob>, LlmError> {
        Ok(self.load()?.into_iter().find(|j| j.job_id == job_id))
    }

    pub fn upsert(&self, job: &FineTuneJob) -> Result<(), LlmError> {
        let mut jobs = self.load()?;
        match jobs.iter_mut().find(|j| j.job_id == job.job_id) {
            Some(slot) => *slot = job.clone(),
            None => jobs.push(job.clone()),
        }
        if let Some(dir) = self.path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| LlmError::Io(dir.display().to_string(), e))?;
        }
        let json = serde_json::to_vec_pretty(&jobs).expect("jobs serialize");
        let tmp = self.path.with_extension("tmp");
        std::fs::write(&tmp, json).map_err(|e| LlmError::Io(tmp.display().to_string(), e))?;
        std::fs::rename(&tmp, &self.path).map_err(|e| LlmError::Io(self.path.display().to_string(), e))
    }
}

pub fn submit_finetune_job(
    provider: &dyn FineTuneProvider,
    store: &JobStore,
    base_model: &str,
    file: &Path,
) -> Result<FineTuneJob, LlmError> {
    let bytes = std::fs::read(file).map_err(|e| LlmError::Io(file.display().to_string(), e))?;
    let job = provider.submit(base_model, &bytes)?;
    store.upsert(&job)?;
    Ok(job)
}

/// Refreshes `job` from the provider, enforcing monotone status, and persists it.
pub fn poll_finetune_job(
    provider: &dyn FineTuneProvider,
    store: &JobStore,
    job: &FineTuneJob,
) -> Result<FineTuneJob, LlmError> {
    let seen = provider.poll(job)?;
    let mut updated = job.clone();
    updated.advance(seen.status)?;
    updated.fine_tuned_model = seen.fine_tuned_model.or(updated.fine_tuned_model);
    updated.error = seen.error.or(updated.error);
    store.upsert(&updated)?;
    Ok(updated)
}

pub fn wait_for_job(
    provider: &dyn FineTuneProvider,
    store: &JobStore,
    job: &FineTuneJob,
    interval: Duration,
    timeout: Duration,
) -> Result<FineTuneJob, LlmError> {
    let deadline = Instant::now() + timeout;
    let mut current = job.clone();
    while !current.status.is_terminal() {
        if Instant::now() >= deadline {
            return Err(LlmError::Job(format!("job {} still {:?} after {timeout:?}", current.job_id, current.status)));
        }
        std::thread::sleep(interval);
        current = poll_finetune_job(provider, store, &current)?;
    }
    Ok(current)
}

/// OpenAI-style `/files` upload followed by `/fine_tuning/jobs`.
pub struct OpenAiFineTune {
    agent: ureq::Agent,
    endpoint: String,
    auth_env: String,
}

impl OpenAiFineTune {
    pub fn new(endpoint: &str, auth_env: &str) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(120)))
            .http_status_as_error(false)
            .build()
            .into();
        Self { agent, endpoint: endpoint.trim_end_matches('/').to_owned(), auth_env: auth_env.to_owned() }
    }

    fn check(status: u16, body: String) -> Result<serde_json::Value, LlmError> {
        if !(200..300).contains(&status) {
            return Err(LlmError::Transport(classify_status(status, None, &body)));
        }
        serde_json::from_str(&body).map_err(|e| LlmError::Job(format!("malformed provider response: {e}")))
    }

    fn job_from(&self, v: &serde_json::Value, digest: &str) -> Result<FineTuneJob, LlmError> {
        let status = match v["status"].as_str().unwrap_or_default() {
            "validating_files" | "queued" | "created" | "pending" => JobStatus::Pending,
            "running" => JobStatus::Running,
            "succeeded" => JobStatus::Succeeded,
            "failed" | "cancelled" => JobStatus::Failed,
            other => return Err(LlmError::Job(format!("unknown job status `{other}`"))),
        };
        Ok(FineTuneJob {
            job_id: v["id"].as_str().ok_or_else(|| LlmError::Job("job response has no id".into()))?.to_owned(),
            provider: self.name().to_owned(),
            base_model: v["model"].as_str().unwrap_or_default().to_owned(),
            status,
            training_file_digest: digest.to_owned(),
            fine_tuned_model: v["fine_tuned_model"].as_str().map(str::to_owned),
            error: v["error"]["message"].as_str().map(str::to_owned),
        })
    }
}

fn http_err(e: ureq::Error) -> LlmError {
    LlmError::Transport(TransportError::Transient(e.to_string()))
}

impl FineTuneProvider for OpenAiFineTune {
    fn name(&self) -> &str {
        "openai"
    }

    fn submit(&self, base_model: &str, training_file: &[u8]) -> Result<FineTuneJob, LlmError> {
        if training_file.is_empty() {
            return Err(LlmError::Job("training file is empty".into()));
        }
        let auth = bearer(&self.auth_env)?;
        let digest = sha256_hex(training_file);
        let boundary = format!("tcls-{}", &digest[..16]);
        let mut form = Vec::new();
        form.extend_from_slice(
            format!("--{boundary}\r\nContent-Disposition: form-data; name=\"purpose\"\r\n\r\nfine-tune\r\n").as_bytes(),
        );
        form.extend_from_slice(
            format!(
                "--{boundary}\r\nContent-Disposition: form-data; name=\"file\"; filename=\"train.jsonl\"\r\n\
                 Content-Type: application/jsonl\r\n\r\n"
            )
            .as_bytes(),
        );
        form.extend_from_slice(training_file);
        form.extend_from_slice(format!("\r\n--{boundary}--\r\n").as_bytes());
        let mut resp = self
            .agent
            .post(format!("{}/files", self.endpoint))
            .header("Authorization", &auth)
            .header("Content-Type", format!("multipart/form-data; boundary={boundary}"))
            .send(&form[..])
            .map_err(http_err)?;
        let status = resp.status().as_u16();
        let file = Self::check(status, resp.body_mut().read_to_string().map_err(http_err)?)?;
        let file_id = file["id"].as_str().ok_or_else(|| LlmError::Job("upload response has no id".into()))?;

        let mut resp = self
            .agent
            .post(format!("{}/fine_tuning/jobs", self.endpoint))
            .header("Authorization", &auth)
            .send_json(serde_json::json!({ "training_file": file_id, "model": base_model }))
            .map_err(http_err)?;
        let status = resp.status().as_u16();
        let job = Self::check(status, resp.body_mut().read_to_string().map_err(http_err)?)?;
        self.job_from(&job, &digest)
    }

    fn poll(&self, job: &FineTuneJob) -> Result<FineTuneJob, LlmError> {
        let auth = bearer(&self.auth_env)?;
        let mut resp = self
            .agent
            .get(format!("{}/fine_tuning/jobs/{}", self.endpoint, job.job_id))
            .header("Authorization", &auth)
            .call()
            .map_err(http_err)?;
        let status = resp.status().as_u16();
        let v = Self::check(status, resp.body_mut().read_to_string().map_err(http_err)?)?;
        self.job_from(&v, &job.training_file_digest)
    }
}

/// In-process provider that walks each job through a fixed status script.
pub struct ScriptedProvider {
    script: Vec<JobStatus>,
    progress: Mutex<std::collections::HashMap<String, usize>>,
    submitted: Mutex<usize>,
}

impl Default for ScriptedProvider {
    /// Pending on submit, then running, running, succeeded.
    fn default() -> Self {
        Self::new(vec![JobStatus::Running, JobStatus::Running, JobStatus::Succeeded])
    }
}

impl ScriptedProvider {
    pub fn new(script: Vec<JobStatus>) -> Self {
        Self { script, progress: Mutex::new(Default::default()), submitted: Mutex::new(0) }
    }
}

impl FineTuneProvider for ScriptedProvider {
    fn name(&self) -> &str {
        "scripted"
    }

    fn submit(&self, base_model: &str, training_file: &[u8]) -> Result<FineTuneJob, LlmError> {
        if training_file.is_empty() {
            return Err(LlmError::Job("provider rejected the job: training file is empty".into()));
        }
        let mut n = self.submitted.lock().expect("provider lock");
        *n += 1;
        Ok(FineTuneJob {
            job_id: format!("ftjob-{n}"),
            provider: self.name().into(),
            base_model: base_model.into(),
            status: JobStatus::Pending,
            training_file_digest: sha256_hex(training_file),
            fine_tuned_model: None,
            error: None,
        })
    }

    fn poll(&self, job: &FineTuneJob) -> Result<FineTuneJob, LlmError> {
        let mut progress = self.progress.lock().expect("provider lock");
        let step = progress.entry(job.job_id.clone()).or_insert(0);
        let status = self.script.get(*step).copied().unwrap_or_else(|| *self.script.last().unwrap_or(&job.status));
        *step += 1;
        let mut out = job.clone();
        out.status = status;
        if status == JobStatus::Succeeded {
            out.fine_tuned_model = Some(format!("ft:{}:{}", job.base_model, job.job_id));
        }
        if status == JobStatus::Failed {
            out.error = Some("scripted failure".into());
        }
        Ok(out)
    }
}
