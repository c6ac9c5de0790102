//! Two runs of the same config with a different backend, compared per model.
//!
//! `cargo run --example compare`

use tcls::runner::{compare_reports, execute_run, list_runs, RunConfig};

fn config(dir: &std::path::Path, model: &str) -> RunConfig {
    let text = format!(
        r#"
[[datasets]]
id = "sms"
format = "sms"
schema = "sms"
train = "sms_train.csv"
test = "sms_test.csv"
test_cap = 400

[[backends]]
id = "llm"
kind = "echo"
model = "{model}"

[[baselines]]
kind = "mnb"
"#
    );
    RunConfig::from_toml(&text, dir).unwrap()
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    tcls::synth::write_corpus(dir.path(), "sms", 42).unwrap();
    let a = execute_run(&config(dir.path(), "echo-a")).unwrap();
    let mut cfg = config(dir.path(), "echo-b");
    cfg.vectorizer.min_df = 3;
    let b = execute_run(&cfg).unwrap();

    for run in list_runs(&dir.path().join("runs")).unwrap() {
        println!("{} partial={} models={:?}", run.run_id, run.partial, run.models);
    }
    for row in compare_reports(&a.report, &b.report).unwrap() {
        let d = &row.delta;
        println!(
            "{:<6} {:<8} acc {} f1 {} u/e {}",
            row.dataset, row.display, d.acc.display, d.f1.display, d.ue.display
        );
    }
}
