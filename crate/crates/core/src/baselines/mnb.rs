use serde::{Deserialize, Serialize};

use super::{argmax, BaselineError};
use crate::text::SparseVector;

/// Floor applied to zero probabilities (alpha = 0 with unseen tokens) so
/// posteriors stay finite. Roughly ln of the smallest normal f64.
pub const LOG_PROB_FLOOR: f64 = -708.0;

/// Multinomial naive Bayes over raw term counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayes {
    pub class_log_prior: Vec<f64>,
    /// `feature_log_prob[c][j] = ln P(token j | class c)`.
    pub feature_log_prob: Vec<Vec<f64>>,
}

pub(crate) fn fit(
    x: &[SparseVector],
    y: &[usize],
    n_classes: usize,
    dim: usize,
    alpha: f64,
) -> Result<NaiveBayes, BaselineError> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(BaselineError::InvalidHyper(format!("alpha must be >= 0, got {alpha}")));
    }
    let mut class_count = vec![0usize; n_classes];
    let mut token_count = vec![vec![0.0f64; dim]; n_classes];
    for (xi, &c) in x.iter().zip(y) {
        class_count[c] += 1;
        for &(j, v) in xi.entries() {
            token_count[c][j] += v;
        }
    }
    let n = x.len() as f64;
    let class_log_prior = class_count.iter().map(|&c| (c as f64 / n).ln()).collect();
    let feature_log_prob = token_count
        .iter()
        .map(|counts| {
            let total: f64 = counts.iter().sum::<f64>() + alpha * dim as f64;
            if total == 0.0 {
                let uniform = -(dim as f64).ln();
                return vec![uniform; dim];
            }
            counts.iter().map(|&c| floor_ln((c + alpha) / total)).collect()
        })
        .collect();
    Ok(NaiveBayes { class_log_prior, feature_log_prob })
}

fn floor_ln(p: f64) -> f64 {
    if p > 0.0 {
        p.ln().max(LOG_PROB_FLOOR)
    } else {
        LOG_PROB_FLOOR
    }
}

impl NaiveBayes {
    pub fn joint_log_likelihood(&self, x: &SparseVector) -> Vec<f64> {
        self.class_log_prior
            .iter()
            .zip(&self.feature_log_prob)
            .map(|(&prior, row)| prior + x.entries().iter().map(|&(j, v)| v * row[j]).sum::<f64>())
            .collect()
    }

    pub(crate) fn predict(&self, x: &SparseVector) -> usize {
        argmax(&self.joint_log_likelihood(x))
    }
}
