#![allow(dead_code)]

use std::path::{Path, PathBuf};

use tcls::corpus::{write_dataset, Dataset, DatasetFormat, LabelSchema, LabeledExample, Split};
use tcls::llm::{author_replay, render_prompt, select_exemplars, write_replay_file, Strategy};
use tcls::runner::RunConfig;

pub const REFUSAL: &str = "I'm sorry, but I cannot classify this text.";
pub const OFF_TOPIC: &str = "banana";

/// What a scripted backend answers for the example at a given position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Answer {
    Gold,
    Wrong,
    Refuse,
    OffTopic,
}

/// `correct` gold answers, then `refused` refusals, `off_topic` unparseable
/// answers and wrong labels for the rest.
pub fn script(n: usize, correct: usize, refused: usize, off_topic: usize) -> Vec<Answer> {
    assert!(correct + refused + off_topic <= n);
    (0..n)
        .map(|i| {
            if i < correct {
                Answer::Gold
            } else if i < correct + refused {
                Answer::Refuse
            } else if i < correct + refused + off_topic {
                Answer::OffTopic
            } else {
                Answer::Wrong
            }
        })
        .collect()
}

pub fn respond(a: Answer, ex: &LabeledExample, schema: &LabelSchema) -> String {
    match a {
        Answer::Gold => format!("{}.", ex.gold),
        Answer::Wrong => {
            let i = schema.index_of(&ex.gold).unwrap();
            schema.label((i + 1) % schema.len()).to_owned()
        }
        Answer::Refuse => REFUSAL.into(),
        Answer::OffTopic => OFF_TOPIC.into(),
    }
}

/// Writes a three-class test file with the 800-example sampled class sizes and a
/// small train file, both in the covid layout.
pub fn write_sentiment_files(dir: &Path) -> (PathBuf, PathBuf) {
    let schema = LabelSchema::builtin("sentiment3").unwrap();
    let fmt = DatasetFormat::builtin("covid").unwrap();
    let test = tcls::synth::generate("covid", &schema, &[344, 130, 326], Split::Test, 11);
    let train = tcls::synth::generate("covid", &schema, &[40, 20, 40], Split::Train, 11);
    let (tr, te) = (dir.join("train.csv"), dir.join("test.csv"));
    write_dataset(&train, &fmt, &tr).unwrap();
    write_dataset(&test, &fmt, &te).unwrap();
    (tr, te)
}

/// Authors the replay file of every replay backend in `cfg` so that backend
/// `id` answers according to `scripts[id]`, in test-set order.
pub fn author_fixtures(cfg: &RunConfig, scripts: &[(&str, Vec<Answer>)]) {
    let template = cfg.prompt_template().unwrap();
    for d in &cfg.datasets {
        let test: Dataset = d.load(&cfg.base_dir, Split::Test).unwrap().unwrap();
        let train = d.load(&cfg.base_dir, Split::Train).unwrap();
        for (id, answers) in scripts {
            let bc = cfg.backends.iter().find(|b| b.id == *id).unwrap();
            let exemplars = match &bc.strategy {
                Strategy::FewShot { k_per_class, seed } => {
                    Some(select_exemplars(train.as_ref().unwrap(), *k_per_class, *seed).unwrap())
                }
                _ => None,
            };
            let prompts: Vec<_> = test
                .examples()
                .iter()
                .map(|e| {
                    render_prompt(&template, &e.text, test.schema(), d.display_name(), exemplars.as_deref()).unwrap()
                })
                .collect();
            assert_eq!(prompts.len(), answers.len(), "script length for {id}");
            let records = author_replay(bc, &prompts, |i| respond(answers[i], &test.examples()[i], test.schema()));
            write_replay_file(&cfg.resolve(bc.replay_file.as_ref().unwrap()), &records).unwrap();
        }
    }
}

pub const TABLE_CONFIG: &str = r#"
output_dir = "runs"

[[datasets]]
id = "covid"
name = "COVID-19 tweets"
format = "covid"
schema = "sentiment3"
train = "train.csv"
test = "test.csv"
reference = "covid"

[[backends]]
id = "gpt35"
kind = "replay"
model = "gpt-3.5-turbo"
display_name = "GPT-3.5"
replay_file = "gpt35.jsonl"

[[backends]]
id = "gemini"
kind = "replay"
model = "gemini-pro"
display_name = "Gemini-pro"
replay_file = "gemini.jsonl"

[[backends]]
id = "llama"
kind = "replay"
model = "llama-3-8b"
display_name = "Llama-3-8B"
replay_file = "llama.jsonl"

[[backends]]
id = "llama-s"
kind = "replay"
model = "llama-3-8b"
display_name = "Llama-3-8B"
replay_file = "llama-s.jsonl"
base = "llama"
strategy = { type = "few_shot", k_per_class = 2, seed = 7 }
"#;

/// The four-backend fixture: 444/800 correct with no U/E; 31 U/E; 409 correct
/// with one refusal; and a few-shot variant at 429 correct.
pub fn table_fixture(dir: &Path) -> RunConfig {
    write_sentiment_files(dir);
    for f in ["gpt35", "gemini", "llama", "llama-s"] {
        std::fs::write(dir.join(format!("{f}.jsonl")), "").unwrap();
    }
    std::fs::write(dir.join("run.toml"), TABLE_CONFIG).unwrap();
    let cfg = tcls::runner::load_run_config(&dir.join("run.toml")).unwrap();
    author_fixtures(
        &cfg,
        &[
            ("gpt35", script(800, 444, 0, 0)),
            ("gemini", script(800, 400, 20, 11)),
            ("llama", script(800, 409, 1, 0)),
            ("llama-s", script(800, 429, 1, 0)),
        ],
    );
    cfg
}

/// The markdown table row whose first cell is `model`.
pub fn row<'a>(md: &'a str, model: &str) -> &'a str {
    let prefix = format!("| {model} |");
    md.lines().find(|l| l.starts_with(&prefix)).unwrap_or_else(|| panic!("no row `{model}` in\n{md}"))
}

pub fn cells(row: &str) -> Vec<&str> {
    row.trim_matches('|').split('|').map(str::trim).collect()
}
