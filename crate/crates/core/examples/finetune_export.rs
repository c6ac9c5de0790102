//! Export chat-format fine-tuning data, then track a job to completion.
//!
//! The job runs against an in-process provider; `OpenAiFineTune` takes its
//! place for a real endpoint.
//!
//! `cargo run --example finetune_export`

use std::time::Duration;

use tcls::corpus::{stratified_sample, Split};
use tcls::llm::{
    export_finetune_data, read_finetune_file, submit_finetune_job, wait_for_job, JobStore, PromptTemplate,
    ScriptedProvider,
};

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let train = tcls::synth::corpus("ecommerce", Split::Train, 42).unwrap();
    let train = stratified_sample(&train, 200, 42).unwrap();
    let out = dir.path().join("ecommerce-ft.jsonl");
    let manifest = export_finetune_data(&train, &PromptTemplate::default(), "e-commerce products", &out).unwrap();
    println!("{}", serde_json::to_string_pretty(&manifest).unwrap());

    let first = &read_finetune_file(&out).unwrap()[0];
    for m in &first.messages {
        println!("[{}] {}", m.role, m.content.lines().next().unwrap_or_default());
    }

    let provider = ScriptedProvider::default();
    let store = JobStore::new(dir.path().join("jobs.json"));
    let job = submit_finetune_job(&provider, &store, "gpt-3.5-turbo", &out).unwrap();
    println!("submitted {} ({:?})", job.job_id, job.status);
    let done = wait_for_job(&provider, &store, &job, Duration::from_millis(10), Duration::from_secs(5)).unwrap();
    println!("{} -> {:?}, model {:?}", done.job_id, done.status, done.fine_tuned_model);
}
