//! Turns free-text model responses into a [`ClassificationOutcome`].

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::LabelSchema;


const DEFAULT_RULES: &str = include_str!("../../data/parser_rules.toml");

#[derive(Debug, Error)]
pub enum ParserError {
    #[error("cannot read rules file {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid rules file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum Verdict {
    Label { label: String },
    Uncertain,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationOutcome {
    #[serde(flatten)]
    pub verdict: Verdict,
    pub evidence: String,
    pub raw: String,
}

impl ClassificationOutcome {
    pub fn label(&self) -> Option<&str> {
        match &self.verdict {
            Verdict::Label { label } => Some(label),
            _ => None,
        }
    }

    pub fn is_uncertain(&self) -> bool {
        self.verdict == Verdict::Uncertain
    }

    pub fn is_error(&self) -> bool {
        self.verdict == Verdict::Error
    }

    /// Error outcome for a request that never produced a response.
    pub fn transport_failure(detail: impl Into<String>) -> Self {
        Self { verdict: Verdict::Error, evidence: "transport".into(), raw: detail.into() }
    }

    /// Short tag used in reports and traces: the label, `uncertain` or `error`.
    pub fn tag(&self) -> &str {
        match &self.verdict {
            Verdict::Label { label } => label,
            Verdict::Uncertain => "uncertain",
            Verdict::Error => "error",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Exact,
    Synonym,
    Mention,
    Refusal,
    Fallback,
}

impl Rule {
    pub const ALL: [Rule; 5] = [Rule::Exact, Rule::Synonym, Rule::Mention, Rule::Refusal, Rule::Fallback];
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RulesFile {
    precedence: Vec<Rule>,
    #[serde(default)]
    fuzzy: bool,
    refusal_patterns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParserRules {
    precedence: Vec<Rule>,
    fuzzy: bool,
    refusal_patterns: Vec<String>,
    /// Normalized token sequences of `refusal_patterns`.
    refusal_tokens: Vec<Vec<String>>,
}

impl Default for ParserRules {
    fn default() -> Self {
        Self::from_toml(DEFAULT_RULES).expect("bundled parser rules are valid")
    }
}

impl ParserRules {
    pub fn new(precedence: Vec<Rule>, refusal_patterns: Vec<String>, fuzzy: bool) -> Result<Self, ParserError> {
        for rule in Rule::ALL {
            let n = precedence.iter().filter(|&&r| r == rule).count();
            if n != 1 {
                return Err(ParserError::Format(format!("precedence must list {rule:?} exactly once (found {n})")));
            }
        }
        if precedence.len() != Rule::ALL.len() {
            return Err(ParserError::Format("precedence lists an unknown rule".into()));
        }
        let refusal_tokens: Vec<Vec<String>> = refusal_patterns.iter().map(|p| tokens(p)).collect();
        if let Some(i) = refusal_tokens.iter().position(|t| t.is_empty()) {
            return Err(ParserError::Format(format!("refusal pattern {:?} has no words", refusal_patterns[i])));
        }
        Ok(Self { precedence, fuzzy, refusal_patterns, refusal_tokens })
    }

    pub fn from_toml(text: &str) -> Result<Self, ParserError> {
        let file: RulesFile = toml::from_str(text).map_err(|e| ParserError::Format(e.to_string()))?;
        Self::new(file.precedence, file.refusal_patterns, file.fuzzy)
    }

    pub fn load(path: &Path) -> Result<Self, ParserError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ParserError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn precedence(&self) -> &[Rule] {
        &self.precedence
    }

    pub fn refusal_patterns(&self) -> &[String] {
        &self.refusal_patterns
    }

    pub fn fuzzy(&self) -> bool {
        self.fuzzy
    }

    pub fn with_fuzzy(mut self, fuzzy: bool) -> Self {
        self.fuzzy = fuzzy;
        self
    }
}

/// Lowercased words with every non-alphanumeric character treated as a separator.
fn tokens(text: &str) -> Vec<String> {
    text.to_lowercase().split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_owned).collect()
}

fn contains_run(haystack: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

pub fn detect_refusal(raw: &str, rules: &ParserRules) -> bool {
    matched_refusal(&tokens(raw), rules).is_some()
}

fn matched_refusal<'r>(words: &[String], rules: &'r ParserRules) -> Option<&'r str> {
    rules.refusal_tokens.iter().position(|p| contains_run(words, p)).map(|i| rules.refusal_patterns[i].as_str())
}

/// Every phrase that names a label: the labels themselves plus synonyms.
fn phrases(schema: &LabelSchema) -> Vec<(Vec<String>, &str)> {
    let mut out: Vec<(Vec<String>, &str)> = schema.labels().iter().map(|l| (tokens(l), l.as_str())).collect();
    for (alias, target) in schema.synonyms() {
        if let Some(canonical) = schema.labels().iter().find(|l| *l == target) {
            out.push((tokens(alias), canonical.as_str()));
        }
    }
    out.retain(|(t, _)| !t.is_empty());
    out
}

enum Mention<'s> {
    None,
    One { label: &'s str, phrase: String },
    Many(Vec<&'s str>),
}

/// Leftmost-longest scan for label phrases on word boundaries.
fn scan_mentions<'s>(words: &[String], phrases: &[(Vec<String>, &'s str)], schema: &'s LabelSchema) -> Mention<'s> {
    let mut found: Vec<(&str, String)> = Vec::new();
    let mut i = 0;
    while i < words.len() {
        let best = phrases.iter().filter(|(p, _)| words[i..].starts_with(p)).max_by_key(|(p, _)| p.len());
        match best {
            Some((p, label)) => {
                found.push((label, p.join(" ")));
                i += p.len();
            }
            None => i += 1,
        }
    }
    let mut distinct: Vec<&str> = Vec::new();
    for label in schema.labels() {
        if found.iter().any(|(l, _)| l == label) {
            distinct.push(label);
        }
    }
    match distinct.len() {
        0 => Mention::None,
        1 => {
            let phrase = found.into_iter().next().map(|(_, p)| p).unwrap_or_default();
            Mention::One { label: distinct[0], phrase }
        }
        _ => Mention::Many(distinct),
    }
}

/// Applies the rule cascade in `rules.precedence()` order. Never fails.
pub fn parse_response(raw: &str, schema: &LabelSchema, rules: &ParserRules) -> ClassificationOutcome {
    let words = tokens(raw);
    let joined = words.join(" ");
    let outcome = |verdict: Verdict, evidence: String| ClassificationOutcome { verdict, evidence, raw: raw.to_owned() };
    let as_label = |label: &str, evidence: String| outcome(Verdict::Label { label: label.to_owned() }, evidence);

    for rule in &rules.precedence {
        match rule {
            Rule::Exact => {
                if joined.is_empty() {
                    continue;
                }
                if let Some(label) = schema.labels().iter().find(|l| tokens(l).join(" ") == joined) {
                    return as_label(label, joined);
                }
                if rules.fuzzy && words.len() == 1 && words[0].chars().count() >= 5 {
                    let near: Vec<&String> = schema
                        .labels()
                        .iter()
                        .filter(|l| !l.contains(' ') && strsim::levenshtein(l, &words[0]) == 1)
                        .collect();
                    if let [label] = near[..] {
                        return as_label(label, format!("fuzzy:{}", words[0]));
                    }
                }
            }
            Rule::Synonym => {
                if joined.is_empty() {
                    continue;
                }
                let hit = schema.synonyms().iter().find(|(alias, _)| tokens(alias).join(" ") == joined);
                if let Some((_, target)) = hit {
                    if let Some(label) = schema.resolve(target) {
                        return as_label(label, joined);
                    }
                }
            }
            Rule::Mention => match scan_mentions(&words, &phrases(schema), schema) {
                Mention::None => {}
                Mention::One { label, phrase } => return as_label(label, phrase),
                Mention::Many(labels) => return outcome(Verdict::Error, format!("ambiguous:{}", labels.join(","))),
            },
            Rule::Refusal => {
                if let Some(pattern) = matched_refusal(&words, rules) {
                    return outcome(Verdict::Uncertain, format!("refusal:{pattern}"));
                }
            }
            Rule::Fallback => {
                let evidence = if words.is_empty() { "empty" } else { "no_label" };
                return outcome(Verdict::Error, evidence.into());
            }
        }
    }
    unreachable!("precedence always contains the fallback rule")
}
