//! Prompt construction, chat-completion transports, response caching and
//! fine-tuning data export.

mod cache;
mod client;
mod config;
mod finetune;
mod prompt;
#[cfg(test)]
mod tests;
pub mod transport;

pub use cache::{cache_key, CacheEntry, ResponseCache};
pub use client::{Backend, RawResponse};
pub use config::{BackendConfig, BackendKind, DecodeParams, RetryPolicy, Strategy};
pub use finetune::{
    export_finetune_data, finetune_manifest_path, poll_finetune_job, read_finetune_file, submit_finetune_job,
    wait_for_job, FineTuneJob, FineTuneManifest, FineTuneProvider, FineTuneRecord, JobStatus, JobStore, OpenAiFineTune,
    ScriptedProvider,
};
pub use prompt::{label_list, render_prompt, select_exemplars, Exemplar, PromptTemplate, RenderedPrompt};
pub use transport::{author_replay, write_replay_file, ReplayRecord, TransportError};

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("template error: {0}")]
    Template(String),
    #[error("backend config: {0}")]
    Config(String),
    #[error("class `{label}` has {have} examples, {need} requested")]
    ClassTooSmall { label: String, have: usize, need: usize },
    #[error("{0}")]
    Transport(#[from] TransportError),
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: String },
    #[error("fine-tune job: {0}")]
    Job(String),
    #[error("{0}: {1}")]
    Io(String, std::io::Error),
}

impl LlmError {
    /// Failures that should stop a run rather than be absorbed per example.
    pub fn is_permanent(&self) -> bool {
        matches!(
            self,
            LlmError::Transport(
                TransportError::Permanent(_) | TransportError::AuthMissing(_) | TransportError::ReplayMiss(_)
            ) | LlmError::Config(_)
                | LlmError::Template(_)
        )
    }
}
