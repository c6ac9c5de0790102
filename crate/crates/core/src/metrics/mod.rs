//! Accuracy, F1 and the uncertain/error rate over parsed outcomes.

use serde::{Deserialize, Serialize};

use crate::corpus::LabelSchema;
use crate::parser::{ClassificationOutcome, Verdict};

mod display;

pub use display::{format_delta, format_metric, round_display};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricsError {
    #[error("{gold} gold labels but {outcomes} outcomes")]
    LengthMismatch { gold: usize, outcomes: usize },
    #[error("no examples to score")]
    Empty,
    #[error("label `{0}` is not in the schema")]
    UnknownLabel(String),
    #[error("cannot compare {0} with {1}")]
    SchemaMismatch(String, String),
}

/// Rows are gold labels, columns predicted labels, both in schema order.
/// `abstained[g]` counts gold-`g` examples that got no label (uncertain or error).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
    pub abstained: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UEStats {
    pub uncertain: u64,
    pub error: u64,
    pub n: u64,
}

/// One-vs-rest tallies for a single class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinaryTally {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn empty(schema: &LabelSchema) -> Self {
        let l = schema.len();
        Self { labels: schema.labels().to_vec(), counts: vec![vec![0; l]; l], abstained: vec![0; l] }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum::<u64>() + self.abstained.iter().sum::<u64>()
    }

    pub fn correct(&self) -> u64 {
        (0..self.labels.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn binary(&self, class: usize) -> BinaryTally {
        let tp = self.counts[class][class];
        let predicted: u64 = self.counts.iter().map(|row| row[class]).sum();
        let support: u64 = self.counts[class].iter().sum::<u64>() + self.abstained[class];
        let fp = predicted - tp;
        let fn_ = support - tp;
        BinaryTally { tp, fp, fn_, tn: self.total() - tp - fp - fn_ }
    }

    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum::<u64>() + self.abstained[class]
    }
}

impl UEStats {
    pub fn combined(&self) -> u64 {
        self.uncertain + self.error
    }
}

/// Label outcomes fill the matrix; uncertain and error outcomes count towards
/// U/E and as a miss for the gold class.
pub fn tally(
    gold: &[&str],
    outcomes: &[ClassificationOutcome],
    schema: &LabelSchema,
) -> Result<(ConfusionMatrix, UEStats), MetricsError> {
    if gold.len() != outcomes.len() {
        return Err(MetricsError::LengthMismatch { gold: gold.len(), outcomes: outcomes.len() });
    }
    if gold.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut cm = ConfusionMatrix::empty(schema);
    let mut ue = UEStats { uncertain: 0, error: 0, n: gold.len() as u64 };
    for (g, out) in gold.iter().zip(outcomes) {
        let gi = schema.index_of(g).ok_or_else(|| MetricsError::UnknownLabel(g.to_string()))?;
        match &out.verdict {
            Verdict::Label { label } => {
                let pi = schema.index_of(label).ok_or_else(|| MetricsError::UnknownLabel(label.clone()))?;
                cm.counts[gi][pi] += 1;
            }
            Verdict::Uncertain => {
                ue.uncertain += 1;
                cm.abstained[gi] += 1;
            }
            Verdict::Error => {
                ue.error += 1;
                cm.abstained[gi] += 1;
            }
        }
    }
    Ok((cm, ue))
}

/// Correct predictions over all `n` examples, abstentions included in `n`.
pub fn accuracy(cm: &ConfusionMatrix, n: u64) -> Result<f64, MetricsError> {
    if n == 0 {
        return Err(MetricsError::Empty);
    }
    Ok(cm.correct() as f64 / n as f64)
}

fn f1_of(t: BinaryTally) -> f64 {
    let denom = 2 * t.tp + t.fp + t.fn_;
    if denom == 0 {
        0.0
    } else {
        (2 * t.tp) as f64 / denom as f64
    }
}

/// `2TP / (2TP + FP + FN)` for `positive`, 0 when the denominator is 0.
pub fn f1_binary(cm: &ConfusionMatrix, positive: &str) -> Result<f64, MetricsError> {
    let c = cm.index_of(positive).ok_or_else(|| MetricsError::UnknownLabel(positive.to_owned()))?;
    Ok(f1_of(cm.binary(c)))
}

pub fn f1_macro(cm: &ConfusionMatrix) -> f64 {
    let l = cm.labels.len();
    if l == 0 {
        return 0.0;
    }
    (0..l).map(|c| f1_of(cm.binary(c))).sum::<f64>() / l as f64
}

/// Per-class F1 weighted by gold support.
pub fn f1_weighted(cm: &ConfusionMatrix) -> f64 {
    let total: u64 = (0..cm.labels.len()).map(|c| cm.support(c)).sum();
    if total == 0 {
        return 0.0;
    }
    (0..cm.labels.len()).map(|c| cm.support(c) as f64 * f1_of(cm.binary(c))).sum::<f64>() / total as f64
}

pub fn ue_rate(s: &UEStats) -> Result<f64, MetricsError> {
    if s.n == 0 {
        return Err(MetricsError::Empty);
    }
    Ok(s.combined() as f64 / s.n as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum F1Average {
    #[default]
    Macro,
    Weighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub dataset: String,
    pub schema_id: String,
    pub n: u64,
    pub acc: f64,
    pub f1: f64,
    pub f1_average: F1Average,
    pub ue: f64,
    pub uncertain: u64,
    pub error: u64,
    pub per_class: Vec<ClassMetrics>,
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

impl MetricSet {
    pub fn compute(
        dataset: &str,
        schema_id: &str,
        cm: &ConfusionMatrix,
        ue: &UEStats,
        average: F1Average,
    ) -> Result<Self, MetricsError> {
        let per_class = cm
            .labels
            .iter()
            .enumerate()
            .map(|(c, label)| {
                let t = cm.binary(c);
                ClassMetrics {
                    label: label.clone(),
                    precision: ratio(t.tp, t.tp + t.fp),
                    recall: ratio(t.tp, t.tp + t.fn_),
                    f1: f1_of(t),
                    support: cm.support(c),
                }
            })
            .collect();
        Ok(Self {
            dataset: dataset.to_owned(),
            schema_id: schema_id.to_owned(),
            n: ue.n,
            acc: accuracy(cm, ue.n)?,
            f1: match average {
                F1Average::Macro => f1_macro(cm),
                F1Average::Weighted => f1_weighted(cm),
            },
            f1_average: average,
            ue: ue_rate(ue)?,
            uncertain: ue.uncertain,
            error: ue.error,
            per_class,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Improved,
    Worse,
    Unchanged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Delta {
    pub base: f64,
    pub variant: f64,
    pub delta: f64,
    /// Signed, three decimals, in parentheses: `(+0.025)`.
    pub display: String,
    pub direction: Direction,
}

impl Delta {
    fn new(base: f64, variant: f64, higher_is_better: bool) -> Self {
        let delta = variant - base;
        let shown = round_display(delta, 3);
        let direction = if shown == 0.0 {
            Direction::Unchanged
        } else if (shown > 0.0) == higher_is_better {
            Direction::Improved
        } else {
            Direction::Worse
        };
        Self { base, variant, delta, display: format_delta(delta), direction }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub dataset: String,
    pub acc: Delta,
    pub f1: Delta,
    pub ue: Delta,
}

/// Signed differences `variant - base`. ACC and F1 improve upwards, U/E downwards.
pub fn compare_runs(base: &MetricSet, variant: &MetricSet) -> Result<DeltaReport, MetricsError> {
    if base.dataset != variant.dataset || base.schema_id != variant.schema_id {
        return Err(MetricsError::SchemaMismatch(
            format!("{}/{}", base.dataset, base.schema_id),
            format!("{}/{}", variant.dataset, variant.schema_id),
        ));
    }
    Ok(DeltaReport {
        dataset: base.dataset.clone(),
        acc: Delta::new(base.acc, variant.acc, true),
        f1: Delta::new(base.f1, variant.f1, true),
        ue: Delta::new(base.ue, variant.ue, false),
    })
}
