use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CorpusError;

/// Canonical form of a label: trimmed and lowercased.
pub fn canonicalize(label: &str) -> String {
    label.trim().to_lowercase()
}

/// An ordered set of canonical labels plus alias spellings.
///
/// Label order is significant: it is the single tie-breaking order used by
/// sampling, exemplar interleaving, baseline argmax and vote ties.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LabelSchema {
    id: String,
    labels: Vec<String>,
    synonyms: BTreeMap<String, String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchema {
    id: String,
    labels: Vec<String>,
    #[serde(default)]
    synonyms: BTreeMap<String, String>,
}

impl<'de> Deserialize<'de> for LabelSchema {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let raw = RawSchema::deserialize(de)?;
        LabelSchema::with_synonyms(raw.id, raw.labels, raw.synonyms).map_err(serde::de::Error::custom)
    }
}

impl LabelSchema {
    pub fn new<I, S>(id: impl Into<String>, labels: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self::with_synonyms(id.into(), labels.into_iter().map(|l| l.as_ref().to_string()).collect(), BTreeMap::new())
    }

    pub fn with_synonyms(
        id: String,
        labels: Vec<String>,
        synonyms: BTreeMap<String, String>,
    ) -> Result<Self, CorpusError> {
        if labels.is_empty() {
            return Err(CorpusError::InvalidSchema(format!("schema `{id}` has no labels")));
        }
        let mut canon = Vec::with_capacity(labels.len());
        for label in &labels {
            let c = canonicalize(label);
            if c.is_empty() {
                return Err(CorpusError::InvalidSchema(format!("schema `{id}` has an empty label")));
            }
            if canon.contains(&c) {
                return Err(CorpusError::InvalidSchema(format!("schema `{id}` repeats label `{c}`")));
            }
            canon.push(c);
        }
        let mut syn = BTreeMap::new();
        for (alias, target) in synonyms {
            let target = canonicalize(&target);
            if !canon.contains(&target) {
                return Err(CorpusError::InvalidSchema(format!(
                    "synonym `{alias}` of schema `{id}` maps to unknown label `{target}`"
                )));
            }
            syn.insert(canonicalize(&alias), target);
        }
        Ok(Self { id, labels: canon, synonyms: syn })
    }

    /// Ad-hoc schema from a user-supplied label list (no synonyms).
    pub fn transient<S: AsRef<str>>(labels: &[S]) -> Result<Self, CorpusError> {
        Self::new("adhoc", labels.iter().map(|l| l.as_ref()))
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CorpusError::InvalidSchema(format!("{}: {e}", path.display())))
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn synonyms(&self) -> &BTreeMap<String, String> {
        &self.synonyms
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.index_of(label).is_some()
    }

    /// Maps a raw label spelling (any case, alias allowed) to its canonical form.
    pub fn resolve(&self, raw: &str) -> Option<&str> {
        let c = canonicalize(raw);
        if let Some(i) = self.index_of(&c) {
            return Some(&self.labels[i]);
        }
        self.synonyms.get(&c).map(String::as_str)
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    /// Built-in schemas for the bundled dataset layouts.
    pub fn builtin(id: &str) -> Option<Self> {
        let syn = |pairs: &[(&str, &str)]| {
            pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect::<BTreeMap<_, _>>()
        };
        let labels = |ls: &[&str]| ls.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let schema = match id {
            "sentiment3" => Self::with_synonyms(
                id.into(),
                labels(&["negative", "neutral", "positive"]),
                syn(&[("extremely negative", "negative"), ("extremely positive", "positive")]),
            ),
            "sentiment5" => Self::new(id, ["very negative", "negative", "neutral", "positive", "very positive"]),
            "ecommerce" => Self::with_synonyms(
                id.into(),
                labels(&["household", "books", "clothing & accessories", "electronics"]),
                syn(&[("c&a", "clothing & accessories"), ("clothing and accessories", "clothing & accessories")]),
            ),
            "sms" => Self::with_synonyms(
                id.into(),
                labels(&["normal", "spam"]),
                syn(&[("ham", "normal"), ("not spam", "normal"), ("non spam", "normal")]),
            ),
            _ => return None,
        };
        schema.ok()
    }

    /// Built-in id, or a path to a schema file.
    pub fn resolve_spec(spec: &str, base_dir: &Path) -> Result<Self, CorpusError> {
        match Self::builtin(spec) {
            Some(s) => Ok(s),
            None => Self::load(&base_dir.join(spec)),
        }
    }
}
