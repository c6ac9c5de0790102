//! Accuracy, F1 and U/E from parsed outcomes, plus a run-to-run delta.
//!
//! `cargo run --example metrics`

use tcls::corpus::LabelSchema;
use tcls::metrics::{compare_runs, format_metric, tally, F1Average, MetricSet};
use tcls::parser::{parse_response, ParserRules};

fn main() {
    let schema = LabelSchema::builtin("sentiment3").unwrap();
    let rules = ParserRules::default();
    let gold = ["positive", "negative", "neutral", "negative", "positive", "neutral"];
    let zero_shot = ["Positive.", "negative", "I cannot determine this.", "neutral", "positive", "banana"];
    let few_shot = ["positive", "negative", "neutral", "negative", "Sentiment: positive", "negative"];

    let score = |answers: &[&str]| {
        let outcomes: Vec<_> = answers.iter().map(|a| parse_response(a, &schema, &rules)).collect();
        let (cm, ue) = tally(&gold, &outcomes, &schema).unwrap();
        MetricSet::compute("demo", schema.id(), &cm, &ue, F1Average::Macro).unwrap()
    };
    let base = score(&zero_shot);
    let variant = score(&few_shot);
    for (name, m) in [("zero-shot", &base), ("few-shot", &variant)] {
        println!(
            "{name:<10} acc {} f1 {} u/e {} (uncertain {}, error {})",
            format_metric(m.acc),
            format_metric(m.f1),
            format_metric(m.ue),
            m.uncertain,
            m.error
        );
    }
    let d = compare_runs(&base, &variant).unwrap();
    println!("delta      acc {} f1 {} u/e {}", d.acc.display, d.f1.display, d.ue.display);
}
