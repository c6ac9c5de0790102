use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::LlmError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    /// OpenAI-compatible chat-completion endpoint.
    #[serde(alias = "remote-chat")]
    RemoteChat,
    /// Serves recorded responses keyed by request digest.
    Replay,
    /// Answers with the user message; for wiring tests.
    Echo,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Strategy {
    #[default]
    ZeroShot,
    FewShot {
        #[serde(default = "default_k")]
        k_per_class: usize,
        #[serde(default)]
        seed: u64,
    },
    Finetuned {
        model: String,
    },
}

fn default_k() -> usize {
    2
}

impl Strategy {
    /// Row suffix used in reports: `(S)` for few-shot, `(F)` for fine-tuned.
    pub fn marker(&self) -> &'static str {
        match self {
            Strategy::ZeroShot => "",
            Strategy::FewShot { .. } => "(S)",
            Strategy::Finetuned { .. } => "(F)",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 4, initial_backoff_ms: 500, max_backoff_ms: 8_000 }
    }
}

impl RetryPolicy {
    /// Delay before retry number `attempt` (1-based): doubling from the initial backoff, capped.
    pub fn backoff(&self, attempt: u32) -> std::time::Duration {
        let factor = 1u64 << attempt.saturating_sub(1).min(20);
        std::time::Duration::from_millis(self.initial_backoff_ms.saturating_mul(factor).min(self.max_backoff_ms))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub temperature: f64,
    pub max_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    /// Required in run configs; the service fills it from the registry key.
    #[serde(default)]
    pub id: String,
    pub kind: BackendKind,
    #[serde(default = "default_endpoint")]
    pub endpoint: String,
    pub model: String,
    #[serde(default)]
    pub model_version: Option<String>,
    /// Environment variable holding the bearer token.
    #[serde(default = "default_auth_env")]
    pub auth_env: String,
    /// Recorded responses for `replay` backends.
    #[serde(default)]
    pub replay_file: Option<PathBuf>,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    /// Requests per second.
    #[serde(default = "default_rate")]
    pub rate_limit: f64,
    #[serde(default)]
    pub strategy: Strategy,
    /// Backend id this one is compared against in reports (for `(S)` / `(F)` rows).
    #[serde(default)]
    pub base: Option<String>,
    /// Row name in reports; defaults to the model name.
    #[serde(default)]
    pub display_name: Option<String>,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_endpoint() -> String {
    "https://api.openai.com/v1".into()
}
fn default_auth_env() -> String {
    "OPENAI_API_KEY".into()
}
fn default_max_tokens() -> u32 {
    64
}
fn default_rate() -> f64 {
    2.0
}
fn default_timeout() -> u64 {
    60
}

impl BackendConfig {
    pub fn new(id: &str, kind: BackendKind, model: &str) -> Self {
        Self {
            id: id.into(),
            kind,
            endpoint: default_endpoint(),
            model: model.into(),
            model_version: None,
            auth_env: default_auth_env(),
            replay_file: None,
            temperature: 0.0,
            max_tokens: default_max_tokens(),
            rate_limit: default_rate(),
            strategy: Strategy::ZeroShot,
            base: None,
            display_name: None,
            retry: RetryPolicy::default(),
            timeout_secs: default_timeout(),
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        let bad = |m: String| Err(LlmError::Config(format!("backend `{}`: {m}", self.id)));
        if self.id.trim().is_empty() {
            return Err(LlmError::Config("backend id is empty".into()));
        }
        if !(self.temperature >= 0.0) || !self.temperature.is_finite() {
            return bad(format!("temperature must be >= 0, got {}", self.temperature));
        }
        if !(self.rate_limit > 0.0) {
            return bad(format!("rate_limit must be > 0, got {}", self.rate_limit));
        }
        if self.retry.max_attempts == 0 {
            return bad("retry.max_attempts must be at least 1".into());
        }
        match &self.strategy {
            Strategy::FewShot { k_per_class: 0, .. } => return bad("few_shot k_per_class must be >= 1".into()),
            Strategy::Finetuned { model } if model.trim().is_empty() => {
                return bad("finetuned strategy needs a model name".into())
            }
            _ => {}
        }
        if self.kind == BackendKind::Replay && self.replay_file.is_none() {
            return bad("replay backends need replay_file".into());
        }
        Ok(())
    }

    /// Model actually queried: the fine-tuned model when that strategy is set.
    pub fn effective_model(&self) -> &str {
        match &self.strategy {
            Strategy::Finetuned { model } => model,
            _ => &self.model,
        }
    }

    /// Model reference including the version string, e.g. `gpt-3.5-turbo@0125`.
    pub fn model_ref(&self) -> String {
        match &self.model_version {
            Some(v) => format!("{}@{v}", self.effective_model()),
            None => self.effective_model().to_owned(),
        }
    }

    pub fn decode(&self) -> DecodeParams {
        DecodeParams { temperature: self.temperature, max_tokens: self.max_tokens }
    }

    pub fn display(&self) -> String {
        let name = self.display_name.clone().unwrap_or_else(|| self.model.clone());
        format!("{name}{}", self.strategy.marker())
    }
}
