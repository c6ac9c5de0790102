//! Zero-shot and few-shot prompt rendering with seeded exemplar selection.
//!
//! `cargo run --example prompts`

use tcls::corpus::Split;
use tcls::llm::{render_prompt, select_exemplars, PromptTemplate};

fn main() {
    let train = tcls::synth::corpus("sms", Split::Train, 42).unwrap();
    let template = PromptTemplate::default();
    let doc = "WINNER! Claim your free prize now, text WIN to 80082";

    let zero = render_prompt(&template, doc, train.schema(), "SMS spam", None).unwrap();
    println!("--- system ---\n{}\n--- user (zero-shot) ---\n{}\n", zero.system, zero.user);

    let exemplars = select_exemplars(&train, 1, 7).unwrap();
    let few = render_prompt(&template, doc, train.schema(), "SMS spam", Some(&exemplars)).unwrap();
    println!("--- user (few-shot, 1 per class) ---\n{}", few.user);
}
