//! The five classical baselines on an SMS spam corpus.
//!
//! Uses real files when `TCLS_SMS_DIR` holds `sms_train.csv` and
//! `sms_test.csv`, otherwise a seeded synthetic corpus.
//!
//! `cargo run --release --example baselines_sms`

use std::path::PathBuf;

use tcls::baselines::{BaselineKind, BaselinePipeline, BaselineSpec};
use tcls::corpus::{load_dataset, stratified_sample, DatasetFormat, LabelSchema, LoadOptions, Split};
use tcls::metrics::{accuracy, f1_macro, format_metric, tally};
use tcls::parser::{ClassificationOutcome, Verdict};

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let (train_path, test_path) = match std::env::var_os("TCLS_SMS_DIR") {
        Some(d) => (PathBuf::from(&d).join("sms_train.csv"), PathBuf::from(&d).join("sms_test.csv")),
        None => tcls::synth::write_corpus(tmp.path(), "sms", 42).unwrap(),
    };
    let format = DatasetFormat::builtin("sms").unwrap();
    let schema = LabelSchema::builtin("sms").unwrap();
    let train = load_dataset(&train_path, &format, &schema, &LoadOptions::split(Split::Train)).unwrap();
    let test = load_dataset(&test_path, &format, &schema, &LoadOptions::split(Split::Test)).unwrap();
    let test = stratified_sample(&test, 800, 42).unwrap();
    println!("train {} / test {}", train.len(), test.len());

    let gold: Vec<&str> = test.examples().iter().map(|e| e.gold.as_str()).collect();
    for kind in [BaselineKind::Mnb, BaselineKind::Lr, BaselineKind::Dt, BaselineKind::Rf, BaselineKind::Knn] {
        let t = std::time::Instant::now();
        let model = BaselinePipeline::fit(&train, &BaselineSpec::default_for(kind), &Default::default()).unwrap();
        let outcomes: Vec<ClassificationOutcome> = test
            .examples()
            .iter()
            .map(|e| {
                let label = model.predict_text(&e.text).unwrap().to_owned();
                ClassificationOutcome {
                    verdict: Verdict::Label { label },
                    evidence: "baseline".into(),
                    raw: String::new(),
                }
            })
            .collect();
        let (cm, ue) = tally(&gold, &outcomes, &schema).unwrap();
        println!(
            "{:<4} acc {} f1 {}  ({} ms)",
            kind.display_name(),
            format_metric(accuracy(&cm, ue.n).unwrap()),
            format_metric(f1_macro(&cm)),
            t.elapsed().as_millis()
        );
    }
}
