//! Labeled corpora: schemas, delimited-text loading, label merging and
//! distribution-preserving down-sampling.

mod dataset;
mod format;
mod sampling;
mod schema;

use std::path::{Path, PathBuf};

pub use dataset::{
    default_sentiment_merge, label_distribution, load_dataset, load_label_mapping, merge_labels, write_dataset,
    Dataset, LabelCounts, LabeledExample, LoadOptions, Provenance, SamplingRecord, Split,
};
pub use format::DatasetFormat;
pub use sampling::{apportion, manifest_path, stratified_sample, write_sample, SampleManifest};
pub use schema::{canonicalize, LabelSchema};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {0}: {1}")]
    Write(PathBuf, String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("{row}: unknown label `{label}`")]
    UnknownLabel { row: String, label: String },
    #[error("{row}: malformed row ({reason})")]
    Malformed { row: String, reason: String },
    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: String },
    #[error("duplicate example id `{0}`")]
    DuplicateId(String),
    #[error("label `{0}` has no mapping")]
    UnmappedLabel(String),
    #[error("invalid label schema: {0}")]
    InvalidSchema(String),
    #[error("invalid dataset format: {0}")]
    InvalidFormat(String),
    #[error("cap {cap} cannot preserve {labels} non-empty labels")]
    CapTooSmall { cap: usize, labels: usize },
}

impl CorpusError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }
}
