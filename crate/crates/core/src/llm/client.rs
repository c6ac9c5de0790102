use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::transport::{ChatMessage, ChatRequest, Echo, HttpChat, RateLimiter, Replay, Transport, TransportError};
use super::{cache_key, BackendConfig, BackendKind, CacheEntry, LlmError, RenderedPrompt, ResponseCache};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawResponse {
    /// Message content exactly as returned.
    pub text: String,
    pub latency_ms: u64,
    pub from_cache: bool,
    pub backend_id: String,
    pub request_digest: String,
    pub model: String,
}

/// A configured backend: transport, limiter and retry policy.
#[derive(Clone)]
pub struct Backend {
    config: BackendConfig,
    transport: Arc<dyn Transport>,
    limiter: Option<Arc<RateLimiter>>,
}

impl std::fmt::Debug for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Backend").field("config", &self.config).finish_non_exhaustive()
    }
}

impl Backend {
    /// Builds the transport named by `config.kind`. Replay paths resolve against `base_dir`.
    pub fn from_config(config: &BackendConfig, base_dir: &std::path::Path) -> Result<Self, LlmError> {
        config.validate()?;
        let transport: Arc<dyn Transport> = match config.kind {
            BackendKind::RemoteChat => {
                Arc::new(HttpChat::new(&config.endpoint, &config.auth_env, Duration::from_secs(config.timeout_secs)))
            }
            BackendKind::Replay => {
                let file = config.replay_file.as_ref().expect("validated");
                Arc::new(Replay::load(&base_dir.join(file))?)
            }
            BackendKind::Echo => Arc::new(Echo::default()),
        };
        Ok(Self::with_transport(config.clone(), transport))
    }

    /// Remote backends are rate limited; replay and echo are not.
    pub fn with_transport(config: BackendConfig, transport: Arc<dyn Transport>) -> Self {
        let limiter = (config.kind == BackendKind::RemoteChat).then(|| Arc::new(RateLimiter::new(config.rate_limit)));
        Self { config, transport, limiter }
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    pub fn transport_calls(&self) -> u64 {
        self.transport.calls()
    }

    pub fn request_key(&self, prompt: &RenderedPrompt) -> String {
        cache_key(&self.config.model_ref(), prompt, &self.config.decode())
    }

    /// Cache first; on a miss, sends with bounded retries and stores the result.
    pub fn complete(&self, prompt: &RenderedPrompt, cache: &ResponseCache) -> Result<RawResponse, LlmError> {
        let started = Instant::now();
        let key = self.request_key(prompt);
        let model = self.config.model_ref();
        if let Some(hit) = cache.get(&key) {
            return Ok(RawResponse {
                text: hit.text,
                latency_ms: started.elapsed().as_millis() as u64,
                from_cache: true,
                backend_id: self.config.id.clone(),
                request_digest: key,
                model,
            });
        }
        let req = ChatRequest {
            key: key.clone(),
            model: self.config.effective_model().to_owned(),
            messages: vec![
                ChatMessage { role: "system".into(), content: prompt.system.clone() },
                ChatMessage { role: "user".into(), content: prompt.user.clone() },
            ],
            temperature: self.config.temperature,
            max_tokens: self.config.max_tokens,
        };
        let policy = &self.config.retry;
        let mut attempt = 0;
        let text = loop {
            attempt += 1;
            if let Some(l) = &self.limiter {
                l.acquire();
            }
            match self.transport.send(&req) {
                Ok(text) => break text,
                Err(e) if e.is_retryable() && attempt < policy.max_attempts => {
                    let wait = match &e {
                        TransportError::RateLimited { retry_after: Some(d) } => (*d).max(policy.backoff(attempt)),
                        _ => policy.backoff(attempt),
                    };
                    tracing::warn!(backend = %self.config.id, attempt, error = %e, "retrying");
                    std::thread::sleep(wait);
                }
                Err(e) if e.is_retryable() => {
                    return Err(LlmError::Exhausted { attempts: attempt, last: e.to_string() })
                }
                Err(e) => return Err(LlmError::Transport(e)),
            }
        };
        cache.put(&CacheEntry { key: key.clone(), model: model.clone(), text: text.clone() })?;
        Ok(RawResponse {
            text,
            latency_ms: started.elapsed().as_millis() as u64,
            from_cache: false,
            backend_id: self.config.id.clone(),
            request_digest: key,
            model,
        })
    }
}
