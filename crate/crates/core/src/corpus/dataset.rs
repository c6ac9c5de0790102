use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use super::{CorpusError, DatasetFormat, LabelSchema};
use crate::digest;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub id: String,
    pub text: String,
    /// Canonical label under the owning dataset's schema.
    pub gold: String,
}

impl LabeledExample {
    pub fn new(id: impl Into<String>, text: impl Into<String>, gold: impl Into<String>) -> Self {
        Self { id: id.into(), text: text.into(), gold: gold.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingRecord {
    pub seed: u64,
    pub cap: usize,
    pub quotas: LabelCounts,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: Option<PathBuf>,
    /// SHA-256 of the source file bytes.
    pub source_digest: Option<String>,
    pub sampling: Option<SamplingRecord>,
}

/// A labeled corpus split. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    schema: LabelSchema,
    split: Split,
    examples: Vec<LabeledExample>,
    provenance: Provenance,
}

impl Dataset {
    pub fn new(
        schema: LabelSchema,
        split: Split,
        examples: Vec<LabeledExample>,
        provenance: Provenance,
    ) -> Result<Self, CorpusError> {
        let mut seen = HashSet::with_capacity(examples.len());
        for ex in &examples {
            if !schema.contains(&ex.gold) {
                return Err(CorpusError::UnknownLabel { row: ex.id.clone(), label: ex.gold.clone() });
            }
            if ex.text.trim().is_empty() {
                return Err(CorpusError::Malformed { row: ex.id.clone(), reason: "empty text".into() });
            }
            if !seen.insert(ex.id.as_str()) {
                return Err(CorpusError::DuplicateId(ex.id.clone()));
            }
        }
        Ok(Self { schema, split, examples, provenance })
    }

    pub fn schema(&self) -> &LabelSchema {
        &self.schema
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn examples(&self) -> &[LabeledExample] {
        &self.examples
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub(crate) fn with_examples(&self, examples: Vec<LabeledExample>, provenance: Provenance) -> Self {
        Self { schema: self.schema.clone(), split: self.split, examples, provenance }
    }
}

/// Per-label counts in schema order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelCounts(Vec<(String, usize)>);

impl LabelCounts {
    pub fn zeros(schema: &LabelSchema) -> Self {
        Self(schema.labels().iter().map(|l| (l.clone(), 0)).collect())
    }

    pub fn from_pairs(pairs: Vec<(String, usize)>) -> Self {
        Self(pairs)
    }

    pub fn get(&self, label: &str) -> usize {
        self.0.iter().find(|(l, _)| l == label).map_or(0, |(_, c)| *c)
    }

    pub fn total(&self) -> usize {
        self.0.iter().map(|(_, c)| c).sum()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.0.iter().map(|(_, c)| *c).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.0.iter().map(|(l, c)| (l.as_str(), *c))
    }

    pub(crate) fn bump(&mut self, index: usize) {
        self.0[index].1 += 1;
    }
}

impl Serialize for LabelCounts {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (l, c) in &self.0 {
            map.serialize_entry(l, c)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for LabelCounts {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        // serde_json keeps object order only with preserve_order; accept both map and pair list.
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Pairs(Vec<(String, usize)>),
            Map(BTreeMap<String, usize>),
        }
        Ok(match Repr::deserialize(de)? {
            Repr::Pairs(p) => LabelCounts(p),
            Repr::Map(m) => LabelCounts(m.into_iter().collect()),
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    pub split: Split,
    /// Skip rows that are malformed or carry unknown labels instead of failing.
    pub skip_malformed: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self { split: Split::Train, skip_malformed: false }
    }
}

impl LoadOptions {
    pub fn split(split: Split) -> Self {
        Self { split, ..Self::default() }
    }
}

pub fn load_dataset(
    path: &Path,
    format: &DatasetFormat,
    schema: &LabelSchema,
    opts: &LoadOptions,
) -> Result<Dataset, CorpusError> {
    let bytes = std::fs::read(path).map_err(|e| CorpusError::io(path, e))?;
    let source_digest = digest::sha256_hex(&bytes);
    let mut reader =
        csv::ReaderBuilder::new().delimiter(format.delimiter_byte()?).flexible(true).from_reader(bytes.as_slice());

    let headers = match reader.headers() {
        Ok(h) => h.clone(),
        Err(_) => return Err(CorpusError::EmptyDataset),
    };
    if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
        return Err(CorpusError::EmptyDataset);
    }
    let column = |name: &str| -> Result<usize, CorpusError> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CorpusError::MissingColumn { path: path.to_path_buf(), column: name.into() })
    };
    let text_col = column(&format.text_column)?;
    let label_col = column(&format.label_column)?;
    let id_col = match &format.id_column {
        Some(name) => Some(column(name)?),
        None => headers.iter().position(|h| h.trim() == "id"),
    };

    let mut examples = Vec::new();
    let mut seen = HashSet::new();
    let mut skipped = 0usize;
    for (i, record) in reader.records().enumerate() {
        let row_no = i + 1;
        let row_ref = format!("row-{row_no}");
        let outcome = (|| {
            let record = record.map_err(|e| CorpusError::Malformed { row: row_ref.clone(), reason: e.to_string() })?;
            if record.len() != headers.len() {
                return Err(CorpusError::Malformed {
                    row: row_ref.clone(),
                    reason: format!("expected {} fields, found {}", headers.len(), record.len()),
                });
            }
            let text = &record[text_col];
            if text.trim().is_empty() {
                return Err(CorpusError::Malformed { row: row_ref.clone(), reason: "empty text".into() });
            }
            let raw_label = &record[label_col];
            let gold = schema
                .resolve(raw_label)
                .ok_or_else(|| CorpusError::UnknownLabel { row: row_ref.clone(), label: raw_label.to_string() })?;
            let id = match id_col {
                Some(c) => record[c].trim().to_string(),
                None => row_ref.clone(),
            };
            if !seen.insert(id.clone()) {
                return Err(CorpusError::DuplicateId(id));
            }
            Ok(LabeledExample { id, text: text.to_string(), gold: gold.to_string() })
        })();
        match outcome {
            Ok(ex) => examples.push(ex),
            Err(e) if opts.skip_malformed && !matches!(e, CorpusError::DuplicateId(_)) => {
                tracing::debug!(row = row_no, error = %e, "skipping malformed row");
                skipped += 1;
            }
            Err(e) => return Err(e),
        }
    }
    if skipped > 0 {
        tracing::warn!(path = %path.display(), skipped, "skipped malformed rows");
    }
    if examples.is_empty() {
        return Err(CorpusError::EmptyDataset);
    }
    Dataset::new(
        schema.clone(),
        opts.split,
        examples,
        Provenance { source: Some(path.to_path_buf()), source_digest: Some(source_digest), sampling: None },
    )
}

pub fn label_distribution(ds: &Dataset) -> LabelCounts {
    let schema = ds.schema();
    let mut counts = LabelCounts::zeros(schema);
    for ex in ds.examples() {
        let i = schema.index_of(&ex.gold).expect("dataset golds are schema members");
        counts.bump(i);
    }
    counts
}

/// Relabels every example through `mapping` into `new_schema`.
pub fn merge_labels(
    ds: &Dataset,
    mapping: &BTreeMap<String, String>,
    new_schema: &LabelSchema,
) -> Result<Dataset, CorpusError> {
    let mut resolved = BTreeMap::new();
    for old in ds.schema().labels() {
        let target = mapping
            .iter()
            .find(|(k, _)| super::canonicalize(k) == *old)
            .map(|(_, v)| v)
            .ok_or_else(|| CorpusError::UnmappedLabel(old.clone()))?;
        let new = new_schema
            .resolve(target)
            .ok_or_else(|| CorpusError::UnknownLabel { row: format!("mapping for `{old}`"), label: target.clone() })?;
        resolved.insert(old.as_str(), new.to_string());
    }
    let examples = ds
        .examples()
        .iter()
        .map(|ex| LabeledExample { gold: resolved[ex.gold.as_str()].clone(), ..ex.clone() })
        .collect();
    Dataset::new(new_schema.clone(), ds.split(), examples, ds.provenance().clone())
}

/// Reads a `old = "new"` label mapping table from TOML.
pub fn load_label_mapping(path: &Path) -> Result<BTreeMap<String, String>, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct MappingFile {
        mapping: BTreeMap<String, String>,
    }
    let file: MappingFile =
        toml::from_str(&text).map_err(|e| CorpusError::InvalidFormat(format!("{}: {e}", path.display())))?;
    Ok(file.mapping)
}

/// Default five-to-three sentiment collapse: extreme levels fold into their
/// adjacent polarity.
pub fn default_sentiment_merge() -> BTreeMap<String, String> {
    [
        ("very negative", "negative"),
        ("negative", "negative"),
        ("neutral", "neutral"),
        ("positive", "positive"),
        ("very positive", "positive"),
    ]
    .into_iter()
    .map(|(a, b)| (a.to_string(), b.to_string()))
    .collect()
}

/// Writes `ds` in `format`'s layout with a leading `id` column.
pub fn write_dataset(ds: &Dataset, format: &DatasetFormat, path: &Path) -> Result<(), CorpusError> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(format.delimiter_byte()?)
        .from_path(path)
        .map_err(|e| CorpusError::Write(path.to_path_buf(), e.to_string()))?;
    let header = format.header();
    let mut row: Vec<&str> = vec!["id"];
    row.extend(header.iter().copied());
    w.write_record(&row).map_err(|e| CorpusError::Write(path.to_path_buf(), e.to_string()))?;
    for ex in ds.examples() {
        let mut row: Vec<&str> = vec![&ex.id];
        for col in &header {
            row.push(if *col == format.text_column { &ex.text } else { &ex.gold });
        }
        w.write_record(&row).map_err(|e| CorpusError::Write(path.to_path_buf(), e.to_string()))?;
    }
    w.flush().map_err(|e| CorpusError::io(path, e))
}
