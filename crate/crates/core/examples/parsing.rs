//! How raw model answers map to a label, Uncertain or Error.
//!
//! `cargo run --example parsing`

use tcls::corpus::LabelSchema;
use tcls::parser::{parse_response, ParserRules};

fn main() {
    let schema = LabelSchema::builtin("sentiment3").unwrap();
    let rules = ParserRules::default();
    let answers = [
        "Neutral",
        "**Negative**",
        "The sentiment of this tweet is positive.",
        "I'm sorry, but I can't classify this.",
        "It is either positive or negative.",
        "mixed feelings",
        "",
    ];
    for raw in answers {
        let out = parse_response(raw, &schema, &rules);
        println!("{raw:<45?} -> {:<12} ({})", out.tag(), out.evidence);
    }
}
