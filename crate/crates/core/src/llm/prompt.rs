use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::LlmError;
use crate::corpus::{Dataset, LabelSchema};

/// Instruction text shared by every backend. Only `{dataset_name}` and
/// `{labels}` change between datasets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptTemplate {
    pub id: String,
    /// May use `{dataset_name}` and `{labels}`; `{labels}` must appear exactly once.
    pub system_text: String,
    /// May use `{input}`, `{dataset_name}` and `{labels}`.
    pub user_text: String,
    /// May use `{example_text}` and `{example_label}`. Blocks are prepended to the user message.
    pub exemplar_block_format: String,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self {
            id: "default-v1".into(),
            system_text: "You are annotating texts from the {dataset_name} dataset.\n\
                          Choose exactly one label from this list: {labels}.\n\
                          Answer with the label only, without explanation."
                .into(),
            user_text: "{input}".into(),
            exemplar_block_format: "Text: {example_text}\nLabel: {example_label}\n\n".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub id: String,
    pub text: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub system: String,
    pub user: String,
}

const SYSTEM_VARS: &[&str] = &["dataset_name", "labels"];
const USER_VARS: &[&str] = &["input", "dataset_name", "labels"];
const EXEMPLAR_VARS: &[&str] = &["example_text", "example_label"];

/// Splits `text` into literal and `{name}` parts. `{{` and `}}` are literal braces.
fn parse_placeholders(text: &str, field: &str) -> Result<Vec<Part>, LlmError> {
    let mut parts = Vec::new();
    let mut lit = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '{' if chars.peek() == Some(&'{') => {
                chars.next();
                lit.push('{');
            }
            '}' if chars.peek() == Some(&'}') => {
                chars.next();
                lit.push('}');
            }
            '{' => {
                let mut name = String::new();
                loop {
                    match chars.next() {
                        Some('}') => break,
                        Some(c) if c.is_ascii_alphanumeric() || c == '_' => name.push(c),
                        _ => return Err(LlmError::Template(format!("{field}: unterminated placeholder `{{{name}`"))),
                    }
                }
                if !lit.is_empty() {
                    parts.push(Part::Lit(std::mem::take(&mut lit)));
                }
                parts.push(Part::Var(name));
            }
            '}' => return Err(LlmError::Template(format!("{field}: stray `}}`"))),
            c => lit.push(c),
        }
    }
    if !lit.is_empty() {
        parts.push(Part::Lit(lit));
    }
    Ok(parts)
}

enum Part {
    Lit(String),
    Var(String),
}

fn fill(text: &str, field: &str, vars: &[(&str, &str)]) -> Result<String, LlmError> {
    let mut out = String::with_capacity(text.len());
    for part in parse_placeholders(text, field)? {
        match part {
            Part::Lit(s) => out.push_str(&s),
            Part::Var(name) => match vars.iter().find(|(k, _)| *k == name) {
                Some((_, v)) => out.push_str(v),
                None => return Err(LlmError::Template(format!("{field}: unresolved placeholder {{{name}}}"))),
            },
        }
    }
    Ok(out)
}

fn check_vars(text: &str, field: &str, allowed: &[&str]) -> Result<Vec<String>, LlmError> {
    let mut used = Vec::new();
    for part in parse_placeholders(text, field)? {
        if let Part::Var(name) = part {
            if !allowed.contains(&name.as_str()) {
                return Err(LlmError::Template(format!("{field}: unresolved placeholder {{{name}}}")));
            }
            used.push(name);
        }
    }
    Ok(used)
}

impl PromptTemplate {
    pub fn validate(&self) -> Result<(), LlmError> {
        let system = check_vars(&self.system_text, "system_text", SYSTEM_VARS)?;
        let user = check_vars(&self.user_text, "user_text", USER_VARS)?;
        check_vars(&self.exemplar_block_format, "exemplar_block_format", EXEMPLAR_VARS)?;
        let labels = system.iter().chain(&user).filter(|v| *v == "labels").count();
        if labels != 1 {
            return Err(LlmError::Template(format!(
                "template `{}` must list the labels exactly once, found {labels} {{labels}} placeholders",
                self.id
            )));
        }
        if !user.iter().any(|v| v == "input") {
            return Err(LlmError::Template(format!("template `{}`: user_text never uses {{input}}", self.id)));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path).map_err(|e| LlmError::Io(path.display().to_string(), e))?;
        let t: Self = toml::from_str(&text).map_err(|e| LlmError::Template(format!("{}: {e}", path.display())))?;
        t.validate()?;
        Ok(t)
    }
}

/// Comma-separated label list in schema order.
pub fn label_list(schema: &LabelSchema) -> String {
    schema.labels().join(", ")
}

/// Renders system and user messages. Exemplar blocks, if any, come before the
/// user text; an empty exemplar list renders the same as zero-shot.
pub fn render_prompt(
    t: &PromptTemplate,
    doc: &str,
    schema: &LabelSchema,
    dataset_name: &str,
    exemplars: Option<&[Exemplar]>,
) -> Result<RenderedPrompt, LlmError> {
    t.validate()?;
    let labels = label_list(schema);
    let common = [("dataset_name", dataset_name), ("labels", labels.as_str())];
    let system = fill(&t.system_text, "system_text", &common)?;
    let mut user = String::new();
    for ex in exemplars.unwrap_or_default() {
        user.push_str(&fill(
            &t.exemplar_block_format,
            "exemplar_block_format",
            &[("example_text", &ex.text), ("example_label", &ex.label)],
        )?);
    }
    user.push_str(&fill(&t.user_text, "user_text", &[common[0], common[1], ("input", doc)])?);
    Ok(RenderedPrompt { system, user })
}

/// `k_per_class` seeded draws without replacement from each class, presented
/// round-robin in schema label order.
pub fn select_exemplars(train: &Dataset, k_per_class: usize, seed: u64) -> Result<Vec<Exemplar>, LlmError> {
    if k_per_class == 0 {
        return Err(LlmError::Config("k_per_class must be at least 1".into()));
    }
    let schema = train.schema();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut per_class: Vec<Vec<Exemplar>> = Vec::with_capacity(schema.len());
    for label in schema.labels() {
        let pool: Vec<usize> = (0..train.len()).filter(|&i| &train.examples()[i].gold == label).collect();
        if pool.len() < k_per_class {
            return Err(LlmError::ClassTooSmall { label: label.clone(), have: pool.len(), need: k_per_class });
        }
        let picked = rand::seq::index::sample(&mut rng, pool.len(), k_per_class);
        per_class.push(
            picked
                .into_iter()
                .map(|p| {
                    let ex = &train.examples()[pool[p]];
                    Exemplar { id: ex.id.clone(), text: ex.text.clone(), label: ex.gold.clone() }
                })
                .collect(),
        );
    }
    let mut out = Vec::with_capacity(k_per_class * schema.len());
    for round in 0..k_per_class {
        for class in &per_class {
            out.push(class[round].clone());
        }
    }
    Ok(out)
}
