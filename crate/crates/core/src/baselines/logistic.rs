use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, BaselineError};
use crate::text::SparseVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogisticHyper {
    pub lr: f64,
    pub epochs: usize,
    pub l2: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for LogisticHyper {
    fn default() -> Self {
        Self { lr: 0.1, epochs: 30, l2: 1e-4, batch_size: 32, seed: 0 }
    }
}

/// Multinomial softmax regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxRegression {
    /// `weights[c][j]`, one row per class.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    /// Mean mini-batch loss per epoch.
    pub loss_history: Vec<f64>,
}

/// Gradient of the regularized mean cross-entropy.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl SoftmaxRegression {
    pub fn zeros(n_classes: usize, dim: usize) -> Self {
        Self { weights: vec![vec![0.0; dim]; n_classes], bias: vec![0.0; n_classes], loss_history: Vec::new() }
    }

    pub fn logits(&self, x: &SparseVector) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| b + x.entries().iter().map(|&(j, v)| v * row[j]).sum::<f64>())
            .collect()
    }

    pub fn probabilities(&self, x: &SparseVector) -> Vec<f64> {
        softmax(&self.logits(x))
    }

    pub(crate) fn predict(&self, x: &SparseVector) -> usize {
        argmax(&self.logits(x))
    }

    /// Mean cross-entropy over `(x, y)` plus `l2 / 2 * ||W||^2` (bias unpenalized),
    /// with its analytic gradient.
    pub fn loss_and_gradient(&self, x: &[SparseVector], y: &[usize], l2: f64) -> (f64, Gradient) {
        let n = x.len().max(1) as f64;
        let mut grad = Gradient {
            weights: self.weights.iter().map(|r| r.iter().map(|w| l2 * w).collect()).collect(),
            bias: vec![0.0; self.bias.len()],
        };
        let mut loss = 0.5 * l2 * self.weights.iter().flatten().map(|w| w * w).sum::<f64>();
        for (xi, &yi) in x.iter().zip(y) {
            let z = self.logits(xi);
            loss += (log_sum_exp(&z) - z[yi]) / n;
            let p = softmax(&z);
            for (c, pc) in p.iter().enumerate() {
                let delta = (pc - if c == yi { 1.0 } else { 0.0 }) / n;
                grad.bias[c] += delta;
                for &(j, v) in xi.entries() {
                    grad.weights[c][j] += delta * v;
                }
            }
        }
        (loss, grad)
    }
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub(crate) fn fit(
    x: &[SparseVector],
    y: &[usize],
    n_classes: usize,
    dim: usize,
    hyper: &LogisticHyper,
) -> Result<SoftmaxRegression, BaselineError> {
    if hyper.batch_size == 0 || !(hyper.lr > 0.0) || !(hyper.l2 >= 0.0) {
        return Err(BaselineError::InvalidHyper(format!("{hyper:?}")));
    }
    let mut model = SoftmaxRegression::zeros(n_classes, dim);
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut order: Vec<usize> = (0..x.len()).collect();
    let decay = 1.0 - hyper.lr * hyper.l2;

    for epoch in 0..hyper.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(hyper.batch_size) {
            let bn = batch.len() as f64;
            let mut batch_loss = 0.0;
            let mut grad_b = vec![0.0; n_classes];
            let mut grad_w: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_classes];
            for &i in batch {
                let z = model.logits(&x[i]);
                batch_loss += (log_sum_exp(&z) - z[y[i]]) / bn;
                let p = softmax(&z);
                for (c, pc) in p.iter().enumerate() {
                    let delta = (pc - if c == y[i] { 1.0 } else { 0.0 }) / bn;
                    grad_b[c] += delta;
                    grad_w[c].extend(x[i].entries().iter().map(|&(j, v)| (j, delta * v)));
                }
            }
            batch_loss += 0.5 * hyper.l2 * model.weights.iter().flatten().map(|w| w * w).sum::<f64>();
            if !batch_loss.is_finite() {
                return Err(BaselineError::NonFiniteLoss { epoch });
            }
            // weight decay is the l2 part of the gradient step
            if hyper.l2 > 0.0 {
                for row in &mut model.weights {
                    row.iter_mut().for_each(|w| *w *= decay);
                }
            }
            for c in 0..n_classes {
                model.bias[c] -= hyper.lr * grad_b[c];
                for &(j, g) in &grad_w[c] {
                    model.weights[c][j] -= hyper.lr * g;
                }
            }
            epoch_loss += batch_loss;
            batches += 1;
        }
        model.loss_history.push(epoch_loss / batches.max(1) as f64);
    }
    Ok(model)
}
