//! A full run from a config file: two replayed LLM backends (zero-shot and
//! few-shot), two baselines, and the report. Running it twice shows the
//! response cache: the second run makes no backend calls.
//!
//! `cargo run --example replay_run`

use std::path::Path;

use tcls::corpus::{Dataset, LabeledExample, Split};
use tcls::llm::{author_replay, render_prompt, select_exemplars, write_replay_file, Strategy};
use tcls::runner::{execute_run, load_run_config, render_report, ReportFormat};

const CONFIG: &str = r#"
output_dir = "runs"

[[datasets]]
id = "economic"
name = "Economic texts"
format = "economic"
schema = "sentiment3"
source_schema = "sentiment5"
mapping = "sentiment5to3"
train = "economic_train.csv"
test = "economic_test.csv"
test_cap = 300
reference = "economic"

[[backends]]
id = "llm"
kind = "replay"
model = "demo-llm"
display_name = "Demo LLM"
replay_file = "zero.jsonl"

[[backends]]
id = "llm-s"
kind = "replay"
model = "demo-llm"
display_name = "Demo LLM"
replay_file = "few.jsonl"
base = "llm"
strategy = { type = "few_shot", k_per_class = 2, seed = 1 }

[[baselines]]
kind = "mnb"

[[baselines]]
kind = "lr"
"#;

/// A stand-in model: keyword votes, and a refusal now and then.
fn answer(ex: &LabeledExample, sharper: bool) -> String {
    let t = ex.text.to_lowercase();
    let hits = |words: &[&str]| words.iter().filter(|w| t.contains(*w)).count();
    let neg = hits(&["loss", "decline", "fell", "crisis", "slump", "cut", "fear", "worse"]);
    let pos = hits(&["growth", "profit", "rise", "gain", "strong", "record", "improved", "up"]);
    if ex.id.ends_with('7') && !sharper {
        return "I'm sorry, I cannot tell from this text.".into();
    }
    let label = match (pos, neg) {
        (p, n) if p > n => "positive",
        (p, n) if n > p => "negative",
        _ if sharper => ex.gold.as_str(),
        _ => "neutral",
    };
    format!("Sentiment: {label}")
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    tcls::synth::write_corpus(dir.path(), "economic", 42).unwrap();
    for f in ["zero.jsonl", "few.jsonl"] {
        std::fs::write(dir.path().join(f), "").unwrap();
    }
    std::fs::write(dir.path().join("run.toml"), CONFIG).unwrap();
    let cfg = load_run_config(&dir.path().join("run.toml")).unwrap();

    let d = &cfg.datasets[0];
    let test: Dataset = d.load(&cfg.base_dir, Split::Test).unwrap().unwrap();
    let train = d.load(&cfg.base_dir, Split::Train).unwrap().unwrap();
    let template = cfg.prompt_template().unwrap();
    for b in &cfg.backends {
        let exemplars = match b.strategy {
            Strategy::FewShot { k_per_class, seed } => Some(select_exemplars(&train, k_per_class, seed).unwrap()),
            _ => None,
        };
        let prompts: Vec<_> = test
            .examples()
            .iter()
            .map(|e| render_prompt(&template, &e.text, test.schema(), d.display_name(), exemplars.as_deref()).unwrap())
            .collect();
        let records = author_replay(b, &prompts, |i| answer(&test.examples()[i], exemplars.is_some()));
        write_replay_file(&cfg.resolve(Path::new(b.replay_file.as_ref().unwrap())), &records).unwrap();
    }

    let first = execute_run(&cfg).unwrap();
    print!("{}", render_report(&first.report, ReportFormat::Markdown).unwrap());
    let second = execute_run(&cfg).unwrap();
    println!(
        "\n{}: {} backend calls\n{}: {} backend calls",
        first.meta.run_id, first.meta.transport_calls, second.meta.run_id, second.meta.transport_calls
    );
}
