use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CorpusError;

/// Column layout of a delimited-text dataset file with a header row.
///
/// A format file lets a new corpus be loaded without code changes:
///
/// ```toml
/// id = "reviews"
/// text_column = "body"
/// label_column = "stars"
/// delimiter = "\t"
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetFormat {
    pub id: String,
    pub text_column: String,
    pub label_column: String,
    /// Column holding stable row ids. When absent an `id` column is used if
    /// the header has one, otherwise rows are numbered `row-<n>`.
    #[serde(default)]
    pub id_column: Option<String>,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
}

fn default_delimiter() -> char {
    ','
}

impl DatasetFormat {
    pub fn new(id: &str, text_column: &str, label_column: &str) -> Self {
        Self {
            id: id.into(),
            text_column: text_column.into(),
            label_column: label_column.into(),
            id_column: None,
            delimiter: ',',
        }
    }

    /// The four bundled layouts: `covid`, `economic`, `ecommerce`, `sms`.
    pub fn builtin(id: &str) -> Option<Self> {
        Some(match id {
            "covid" => Self::new(id, "tweet_text", "sentiment"),
            "economic" => Self::new(id, "sentence", "label"),
            "ecommerce" => Self::new(id, "description", "category"),
            "sms" => Self::new(id, "message", "label"),
            _ => return None,
        })
    }

    /// Header order used when writing files in this layout.
    pub fn header(&self) -> Vec<&str> {
        match self.id.as_str() {
            "ecommerce" => vec![&self.label_column, &self.text_column],
            "sms" => vec![&self.label_column, &self.text_column],
            _ => vec![&self.text_column, &self.label_column],
        }
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CorpusError::InvalidFormat(format!("{}: {e}", path.display())))
    }

    /// Built-in id, or a path (relative to `base_dir`) to a format file.
    pub fn resolve_spec(spec: &str, base_dir: &Path) -> Result<Self, CorpusError> {
        match Self::builtin(spec) {
            Some(f) => Ok(f),
            None => Self::load(&base_dir.join(spec)),
        }
    }

    pub(crate) fn delimiter_byte(&self) -> Result<u8, CorpusError> {
        u8::try_from(self.delimiter)
            .ok()
            .filter(u8::is_ascii)
            .ok_or_else(|| CorpusError::InvalidFormat(format!("delimiter {:?} is not ASCII", self.delimiter)))
    }
}
