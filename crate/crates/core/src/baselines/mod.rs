//! From-scratch classical classifiers: multinomial naive Bayes, softmax
//! regression, decision tree, random forest and k-nearest neighbours.
//!
//! Every argmax or vote tie resolves to the earliest label in the
//! [`LabelSchema`] order.

mod forest;
mod knn;
mod logistic;
mod mnb;
mod tree;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use forest::{FeatureSubsample, ForestHyper, RandomForest};
pub use knn::{cosine_distance, NearestNeighbors};
pub use logistic::{softmax, Gradient, LogisticHyper, SoftmaxRegression};
pub use mnb::{NaiveBayes, LOG_PROB_FLOOR};
pub use tree::{DecisionTree, Node, TreeHyper};

use crate::corpus::{Dataset, LabelSchema};
use crate::text::{preprocess, SparseVector, TextError, Vectorizer, VectorizerConfig};

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum BaselineError {
    #[error("training set is empty or X and y lengths differ ({x} vs {y})")]
    BadShape { x: usize, y: usize },
    #[error("label `{0}` is not in the schema")]
    UnknownLabel(String),
    #[error("schema class `{0}` has no training examples")]
    MissingClass(String),
    #[error("non-finite training loss in epoch {epoch}; lower the learning rate")]
    NonFiniteLoss { epoch: usize },
    #[error("input has column {got} but the model was trained on {expected} features")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid hyperparameters: {0}")]
    InvalidHyper(String),
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    Mnb,
    Lr,
    Dt,
    Rf,
    Knn,
}

impl BaselineKind {
    pub fn display_name(self) -> &'static str {
        match self {
            BaselineKind::Mnb => "MNB",
            BaselineKind::Lr => "LR",
            BaselineKind::Dt => "DT",
            BaselineKind::Rf => "RF",
            BaselineKind::Knn => "KNN",
        }
    }

    /// MNB consumes raw counts; the others consume tf-idf.
    pub fn uses_raw_counts(self) -> bool {
        matches!(self, BaselineKind::Mnb)
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

/// Baseline kind plus hyperparameters, as written in run configs:
///
/// ```toml
/// [[baselines]]
/// kind = "rf"
/// n_trees = 50
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BaselineSpec {
    Mnb {
        #[serde(default = "default_alpha")]
        alpha: f64,
    },
    Lr(#[serde(default)] LogisticHyper),
    Dt(#[serde(default)] TreeHyper),
    Rf(#[serde(default)] ForestHyper),
    Knn {
        #[serde(default = "default_k")]
        k: usize,
    },
}

fn default_alpha() -> f64 {
    1.0
}

fn default_k() -> usize {
    5
}

impl BaselineSpec {
    pub fn default_for(kind: BaselineKind) -> Self {
        match kind {
            BaselineKind::Mnb => BaselineSpec::Mnb { alpha: default_alpha() },
            BaselineKind::Lr => BaselineSpec::Lr(LogisticHyper::default()),
            BaselineKind::Dt => BaselineSpec::Dt(TreeHyper::default()),
            BaselineKind::Rf => BaselineSpec::Rf(ForestHyper::default()),
            BaselineKind::Knn => BaselineSpec::Knn { k: default_k() },
        }
    }

    pub fn kind(&self) -> BaselineKind {
        match self {
            BaselineSpec::Mnb { .. } => BaselineKind::Mnb,
            BaselineSpec::Lr(_) => BaselineKind::Lr,
            BaselineSpec::Dt(_) => BaselineKind::Dt,
            BaselineSpec::Rf(_) => BaselineKind::Rf,
            BaselineSpec::Knn { .. } => BaselineKind::Knn,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Params {
    Mnb(NaiveBayes),
    Lr(SoftmaxRegression),
    Dt(DecisionTree),
    Rf(RandomForest),
    Knn(NearestNeighbors),
}

/// A trained classifier bound to its label schema and input dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub schema: LabelSchema,
    pub dim: usize,
    pub params: Params,
}

impl BaselineModel {
    pub fn kind(&self) -> BaselineKind {
        match self.params {
            Params::Mnb(_) => BaselineKind::Mnb,
            Params::Lr(_) => BaselineKind::Lr,
            Params::Dt(_) => BaselineKind::Dt,
            Params::Rf(_) => BaselineKind::Rf,
            Params::Knn(_) => BaselineKind::Knn,
        }
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn argmax_counts(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, c) in counts.iter().enumerate().skip(1) {
        if *c > counts[best] {
            best = i;
        }
    }
    best
}

fn encode_labels(
    x: &[SparseVector],
    y: &[String],
    schema: &LabelSchema,
    dim: usize,
) -> Result<Vec<usize>, BaselineError> {
    if x.is_empty() || x.len() != y.len() {
        return Err(BaselineError::BadShape { x: x.len(), y: y.len() });
    }
    if let Some(bad) = x.iter().map(SparseVector::min_dim).find(|&d| d > dim) {
        return Err(BaselineError::DimensionMismatch { expected: dim, got: bad - 1 });
    }
    y.iter().map(|l| schema.index_of(l).ok_or_else(|| BaselineError::UnknownLabel(l.clone()))).collect()
}

pub fn train_mnb(
    x: &[SparseVector],
    y: &[String],
    schema: &LabelSchema,
    dim: usize,
    alpha: f64,
) -> Result<BaselineModel, BaselineError> {
    let yi = encode_labels(x, y, schema, dim)?;
    for (c, label) in schema.labels().iter().enumerate() {
        if !yi.contains(&c) {
            return Err(BaselineError::MissingClass(label.clone()));
        }
    }
    let nb = mnb::fit(x, &yi, schema.len(), dim, alpha)?;
    Ok(BaselineModel { schema: schema.clone(), dim, params: Params::Mnb(nb) })
}

pub fn train_logistic(
    x: &[SparseVector],
    y: &[String],
    schema: &LabelSchema,
    dim: usize,
    hyper: &LogisticHyper,
) -> Result<BaselineModel, BaselineError> {
    let yi = encode_labels(x, y, schema, dim)?;
    let lr = logistic::fit(x, &yi, schema.len(), dim, hyper)?;
    Ok(BaselineModel { schema: schema.clone(), dim, params: Params::Lr(lr) })
}

pub fn train_decision_tree(
    x: &[SparseVector],
    y: &[String],
    schema: &LabelSchema,
    dim: usize,
    hyper: &TreeHyper,
) -> Result<BaselineModel, BaselineError> {
    let yi = encode_labels(x, y, schema, dim)?;
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
    let samples: Vec<usize> = (0..x.len()).collect();
    let dt = tree::Grower { x, y: &yi, n_classes: schema.len(), hyper, draw: tree::FeatureDraw::All, rng: &mut rng }
        .grow(&samples);
    Ok(BaselineModel { schema: schema.clone(), dim, params: Params::Dt(dt) })
}

pub fn train_random_forest(
    x: &[SparseVector],
    y: &[String],
    schema: &LabelSchema,
    dim: usize,
    hyper: &ForestHyper,
) -> Result<BaselineModel, BaselineError> {
    let yi = encode_labels(x, y, schema, dim)?;
    let rf = forest::fit(x, &yi, schema.len(), dim, hyper)?;
    Ok(BaselineModel { schema: schema.clone(), dim, params: Params::Rf(rf) })
}

pub fn train_knn(
    x: &[SparseVector],
    y: &[String],
    schema: &LabelSchema,
    dim: usize,
    k: usize,
) -> Result<BaselineModel, BaselineError> {
    if k == 0 {
        return Err(BaselineError::InvalidHyper("k must be >= 1".into()));
    }
    let labels = encode_labels(x, y, schema, dim)?;
    let knn = NearestNeighbors { k, points: x.to_vec(), labels };
    Ok(BaselineModel { schema: schema.clone(), dim, params: Params::Knn(knn) })
}

pub fn train(
    spec: &BaselineSpec,
    x: &[SparseVector],
    y: &[String],
    schema: &LabelSchema,
    dim: usize,
) -> Result<BaselineModel, BaselineError> {
    match spec {
        BaselineSpec::Mnb { alpha } => train_mnb(x, y, schema, dim, *alpha),
        BaselineSpec::Lr(h) => train_logistic(x, y, schema, dim, h),
        BaselineSpec::Dt(h) => train_decision_tree(x, y, schema, dim, h),
        BaselineSpec::Rf(h) => train_random_forest(x, y, schema, dim, h),
        BaselineSpec::Knn { k } => train_knn(x, y, schema, dim, *k),
    }
}

/// Predicts a canonical label. `k_for_knn` overrides the stored k for KNN
/// models and is ignored otherwise.
pub fn predict_baseline<'m>(
    m: &'m BaselineModel,
    x: &SparseVector,
    k_for_knn: Option<usize>,
) -> Result<&'m str, BaselineError> {
    if x.min_dim() > m.dim {
        return Err(BaselineError::DimensionMismatch { expected: m.dim, got: x.min_dim() - 1 });
    }
    let n = m.schema.len();
    let class = match &m.params {
        Params::Mnb(nb) => nb.predict(x),
        Params::Lr(lr) => lr.predict(x),
        Params::Dt(dt) => dt.predict(x),
        Params::Rf(rf) => rf.predict(x, n),
        Params::Knn(knn) => knn.predict(x, k_for_knn.unwrap_or(knn.k), n),
    };
    Ok(m.schema.label(class))
}

/// A vectorizer and model trained together on one dataset, predicting
/// straight from raw text.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselinePipeline {
    pub vectorizer: Vectorizer,
    pub model: BaselineModel,
}

#[derive(Serialize, Deserialize)]
struct PipelineFile {
    format_version: u32,
    model: BaselineModel,
}

impl BaselinePipeline {
    pub fn fit(data: &Dataset, spec: &BaselineSpec, config: &VectorizerConfig) -> Result<Self, BaselineError> {
        let docs: Vec<Vec<String>> = data.examples().iter().map(|e| preprocess(&e.text)).collect();
        let vectorizer = Vectorizer::fit(&docs, config.clone())?;
        let x: Vec<SparseVector> = docs.iter().map(|d| featurize(&vectorizer, spec.kind(), d)).collect();
        let y: Vec<String> = data.examples().iter().map(|e| e.gold.clone()).collect();
        let model = train(spec, &x, &y, data.schema(), vectorizer.vocab_size())?;
        Ok(Self { vectorizer, model })
    }

    pub fn features(&self, text: &str) -> SparseVector {
        featurize(&self.vectorizer, self.model.kind(), &preprocess(text))
    }

    pub fn predict_text(&self, text: &str) -> Result<&str, BaselineError> {
        predict_baseline(&self.model, &self.features(text), None)
    }

    /// Writes `<path>` (model) and `<path>.vocab.json` (vectorizer).
    pub fn save(&self, path: &Path) -> Result<(), BaselineError> {
        let file = PipelineFile { format_version: FORMAT_VERSION, model: self.model.clone() };
        std::fs::write(path, serde_json::to_vec(&file).map_err(|e| BaselineError::Format(e.to_string()))?)?;
        self.vectorizer.save(&vocab_path(path))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, BaselineError> {
        let bytes = std::fs::read(path)?;
        let file: PipelineFile = serde_json::from_slice(&bytes).map_err(|e| BaselineError::Format(e.to_string()))?;
        if file.format_version != FORMAT_VERSION {
            return Err(BaselineError::Format(format!("unsupported format version {}", file.format_version)));
        }
        let vectorizer = Vectorizer::load(&vocab_path(path))?;
        Ok(Self { vectorizer, model: file.model })
    }
}

fn vocab_path(path: &Path) -> std::path::PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".vocab.json");
    path.with_file_name(name)
}

pub fn featurize(v: &Vectorizer, kind: BaselineKind, tokens: &[String]) -> SparseVector {
    if kind.uses_raw_counts() {
        v.counts(tokens)
    } else {
        v.vectorize(tokens)
    }
}

#[cfg(test)]
mod tests;
