use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ConfigError;
use crate::baselines::BaselineSpec;
use crate::corpus::{DatasetFormat, LabelSchema};
use crate::llm::{BackendConfig, BackendKind, PromptTemplate, Strategy};
use crate::metrics::F1Average;
use crate::parser::ParserRules;
use crate::text::VectorizerConfig;

/// A benchmark run: datasets crossed with LLM backends and classical baselines.
///
/// Relative paths resolve against the directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// In-flight backend requests per model.
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    #[serde(default)]
    pub f1_average: F1Average,
    #[serde(default)]
    pub parser_rules: Option<PathBuf>,
    #[serde(default)]
    pub template: Option<PathBuf>,
    #[serde(default)]
    pub vectorizer: VectorizerConfig,
    pub datasets: Vec<DatasetConfig>,
    #[serde(default)]
    pub backends: Vec<BackendConfig>,
    #[serde(default)]
    pub baselines: Vec<BaselineSpec>,
    #[serde(skip)]
    pub base_dir: PathBuf,
    /// The config file bytes, copied into each run directory.
    #[serde(skip)]
    pub source_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub id: String,
    /// Name substituted into prompts; defaults to `id`.
    #[serde(default)]
    pub name: Option<String>,
    /// Built-in layout id or a format file.
    pub format: String,
    /// Schema the evaluation uses (built-in id or schema file).
    pub schema: String,
    /// Schema of the raw files when it differs from `schema`; requires `mapping`.
    #[serde(default)]
    pub source_schema: Option<String>,
    /// `sentiment5to3` or a mapping file.
    #[serde(default)]
    pub mapping: Option<String>,
    #[serde(default)]
    pub train: Option<PathBuf>,
    pub test: PathBuf,
    #[serde(default = "default_train_cap")]
    pub train_cap: usize,
    #[serde(default = "default_test_cap")]
    pub test_cap: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub skip_malformed: bool,
    /// Key into the bundled literature rows (`covid`, `ecommerce`, `economic`, `sms`).
    #[serde(default)]
    pub reference: Option<String>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}
fn default_concurrency() -> usize {
    4
}
fn default_train_cap() -> usize {
    10_000
}
fn default_test_cap() -> usize {
    800
}
fn default_seed() -> u64 {
    42
}

impl DatasetConfig {
    pub fn display_name(&self) -> &str {
        self.name.as_deref().unwrap_or(&self.id)
    }
}

impl RunConfig {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    pub fn output_path(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    pub fn parser_rules(&self) -> Result<ParserRules, ConfigError> {
        match &self.parser_rules {
            Some(p) => ParserRules::load(&self.resolve(p)).map_err(|e| ConfigError::Invalid(e.to_string())),
            None => Ok(ParserRules::default()),
        }
    }

    pub fn prompt_template(&self) -> Result<PromptTemplate, ConfigError> {
        match &self.template {
            Some(p) => PromptTemplate::load(&self.resolve(p)).map_err(|e| ConfigError::Invalid(e.to_string())),
            None => Ok(PromptTemplate::default()),
        }
    }

    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let de = toml::Deserializer::parse(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let mut cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::Schema { path, message: e.into_inner().message().trim().to_owned() }
        })?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.source_text = text.to_owned();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks ids, cross references and that every referenced file exists.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.datasets.is_empty() {
            return invalid("at least one [[datasets]] entry is required".into());
        }
        if self.concurrency == 0 {
            return invalid("concurrency must be at least 1".into());
        }
        let mut seen = HashSet::new();
        for d in &self.datasets {
            if !seen.insert(d.id.as_str()) {
                return invalid(format!("duplicate dataset id `{}`", d.id));
            }
            DatasetFormat::resolve_spec(&d.format, &self.base_dir)
                .map_err(|e| ConfigError::Invalid(format!("dataset `{}`: format: {e}", d.id)))?;
            LabelSchema::resolve_spec(&d.schema, &self.base_dir)
                .map_err(|e| ConfigError::Invalid(format!("dataset `{}`: schema: {e}", d.id)))?;
            match (&d.source_schema, &d.mapping) {
                (Some(s), Some(m)) => {
                    LabelSchema::resolve_spec(s, &self.base_dir)
                        .map_err(|e| ConfigError::Invalid(format!("dataset `{}`: source_schema: {e}", d.id)))?;
                    if m != "sentiment5to3" {
                        self.require_file(&format!("dataset `{}` mapping", d.id), Path::new(m))?;
                    }
                }
                (None, None) => {}
                _ => return invalid(format!("dataset `{}`: source_schema and mapping go together", d.id)),
            }
            self.require_file(&format!("dataset `{}` test file", d.id), &d.test)?;
            if let Some(t) = &d.train {
                self.require_file(&format!("dataset `{}` train file", d.id), t)?;
            }
            if d.test_cap == 0 || d.train_cap == 0 {
                return invalid(format!("dataset `{}`: caps must be positive", d.id));
            }
            let needs_train = !self.baselines.is_empty()
                || self.backends.iter().any(|b| matches!(b.strategy, Strategy::FewShot { .. }));
            if needs_train && d.train.is_none() {
                return invalid(format!("dataset `{}` needs a train file for baselines or few-shot backends", d.id));
            }
        }
        let mut seen = HashSet::new();
        for b in &self.backends {
            if !seen.insert(b.id.as_str()) {
                return invalid(format!("duplicate backend id `{}`", b.id));
            }
            b.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
            if b.kind == BackendKind::Replay {
                self.require_file(
                    &format!("backend `{}` replay_file", b.id),
                    b.replay_file.as_ref().expect("validated"),
                )?;
            }
        }
        for b in &self.backends {
            if let Some(base) = &b.base {
                if base == &b.id || !self.backends.iter().any(|o| &o.id == base) {
                    return invalid(format!("backend `{}`: base `{base}` is not another backend id", b.id));
                }
            }
        }
        let mut kinds = HashSet::new();
        for s in &self.baselines {
            if !kinds.insert(s.kind()) {
                return invalid(format!("baseline `{}` listed twice", s.kind().display_name()));
            }
        }
        if let Some(p) = &self.parser_rules {
            self.require_file("parser_rules", p)?;
        }
        if let Some(p) = &self.template {
            self.require_file("template", p)?;
        }
        self.parser_rules()?;
        self.prompt_template()?;
        Ok(())
    }

    fn require_file(&self, what: &str, p: &Path) -> Result<(), ConfigError> {
        let full = self.resolve(p);
        if full.is_file() {
            Ok(())
        } else {
            Err(ConfigError::MissingFile { what: what.to_owned(), path: full })
        }
    }
}

pub fn load_run_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Parse(format!("cannot read {}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    RunConfig::from_toml(&text, &base)
}
