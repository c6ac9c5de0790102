use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{cache_key, BackendConfig, LlmError, RenderedPrompt};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub key: String,
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TransportError {
    /// Network failure, timeout or 5xx; worth retrying.
    #[error("transient failure: {0}")]
    Transient(String),
    #[error("rate limited")]
    RateLimited { retry_after: Option<Duration> },
    /// Authentication or malformed request; never retried.
    #[error("permanent failure: {0}")]
    Permanent(String),
    #[error("no recorded response for request {0}")]
    ReplayMiss(String),
    #[error("environment variable {0} is not set")]
    AuthMissing(String),
}

impl TransportError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, TransportError::Transient(_) | TransportError::RateLimited { .. })
    }
}

/// Sends one chat-completion request and returns the message content.
pub trait Transport: Send + Sync {
    fn send(&self, req: &ChatRequest) -> Result<String, TransportError>;
    /// Number of `send` calls made so far.
    fn calls(&self) -> u64;
}

/// OpenAI-compatible `POST {endpoint}/chat/completions`.
pub struct HttpChat {
    agent: ureq::Agent,
    url: String,
    auth_env: String,
    calls: AtomicU64,
}

impl HttpChat {
    pub fn new(endpoint: &str, auth_env: &str, timeout: Duration) -> Self {
        let agent: ureq::Agent =
            ureq::Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(false).build().into();
        Self {
            agent,
            url: format!("{}/chat/completions", endpoint.trim_end_matches('/')),
            auth_env: auth_env.to_owned(),
            calls: AtomicU64::new(0),
        }
    }
}

pub(crate) fn bearer(auth_env: &str) -> Result<String, TransportError> {
    match std::env::var(auth_env) {
        Ok(t) if !t.trim().is_empty() => Ok(format!("Bearer {}", t.trim())),
        _ => Err(TransportError::AuthMissing(auth_env.to_owned())),
    }
}

pub(crate) fn classify_status(status: u16, retry_after: Option<&str>, body: &str) -> TransportError {
    match status {
        429 => TransportError::RateLimited {
            retry_after: retry_after.and_then(|v| v.trim().parse::<f64>().ok()).map(Duration::from_secs_f64),
        },
        408 | 500..=599 => TransportError::Transient(format!("HTTP {status}: {body}")),
        _ => TransportError::Permanent(format!("HTTP {status}: {body}")),
    }
}

impl Transport for HttpChat {
    fn send(&self, req: &ChatRequest) -> Result<String, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let auth = bearer(&self.auth_env)?;
        let body = json!({
            "model": req.model,
            "messages": req.messages,
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        });
        let mut resp = self
            .agent
            .post(&self.url)
            .header("Authorization", &auth)
            .send_json(&body)
            .map_err(|e| TransportError::Transient(e.to_string()))?;
        let status = resp.status().as_u16();
        let retry_after = resp.headers().get("retry-after").and_then(|v| v.to_str().ok()).map(str::to_owned);
        let text = resp.body_mut().read_to_string().map_err(|e| TransportError::Transient(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(classify_status(status, retry_after.as_deref(), &text));
        }
        extract_content(&text)
    }

    fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

/// `choices[0].message.content` from a chat-completion response body.
pub fn extract_content(body: &str) -> Result<String, TransportError> {
    let v: serde_json::Value =
        serde_json::from_str(body).map_err(|e| TransportError::Permanent(format!("malformed response: {e}")))?;
    v.pointer("/choices/0/message/content")
        .and_then(|c| c.as_str())
        .map(str::to_owned)
        .ok_or_else(|| TransportError::Permanent("response has no choices[0].message.content".into()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub cache_key: String,
    pub response: String,
}

/// Serves recorded responses only; a missing key is an error naming the digest.
pub struct Replay {
    records: HashMap<String, String>,
    calls: AtomicU64,
}

impl Replay {
    pub fn from_records(records: impl IntoIterator<Item = ReplayRecord>) -> Self {
        Self { records: records.into_iter().map(|r| (r.cache_key, r.response)).collect(), calls: AtomicU64::new(0) }
    }

    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path).map_err(|e| LlmError::Io(path.display().to_string(), e))?;
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let r: ReplayRecord = serde_json::from_str(line)
                .map_err(|e| LlmError::Config(format!("{}:{}: {e}", path.display(), i + 1)))?;
            records.push(r);
        }
        Ok(Self::from_records(records))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

impl Transport for Replay {
    fn send(&self, req: &ChatRequest) -> Result<String, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.records.get(&req.key).cloned().ok_or_else(|| TransportError::ReplayMiss(req.key.clone()))
    }

    fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

/// Replay records answering `prompts` as a backend configured like `config`
/// would request them, with `answer(i)` as the response to prompt `i`.
pub fn author_replay(
    config: &BackendConfig,
    prompts: &[RenderedPrompt],
    mut answer: impl FnMut(usize) -> String,
) -> Vec<ReplayRecord> {
    let (model, decode) = (config.model_ref(), config.decode());
    prompts
        .iter()
        .enumerate()
        .map(|(i, p)| ReplayRecord { cache_key: cache_key(&model, p, &decode), response: answer(i) })
        .collect()
}

pub fn write_replay_file(path: &Path, records: &[ReplayRecord]) -> Result<(), LlmError> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| LlmError::Io(path.display().to_string(), e))
}

/// Returns the final user message unchanged.
#[derive(Default)]
pub struct Echo {
    calls: AtomicU64,
}

impl Transport for Echo {
    fn send(&self, req: &ChatRequest) -> Result<String, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(req.messages.iter().rev().find(|m| m.role == "user").map(|m| m.content.clone()).unwrap_or_default())
    }

    fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

/// Spaces request starts at least `1 / rate` seconds apart across all callers.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next: Mutex<Instant>,
}

impl RateLimiter {
    pub fn new(per_second: f64) -> Self {
        Self { interval: Duration::from_secs_f64(1.0 / per_second), next: Mutex::new(Instant::now()) }
    }

    pub fn acquire(&self) {
        let wait = {
            let mut next = self.next.lock().expect("limiter lock");
            let now = Instant::now();
            let slot = (*next).max(now);
            *next = slot + self.interval;
            slot - now
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}
