use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{DecisionTree, FeatureDraw, Grower, TreeHyper};
use super::{argmax_counts, BaselineError};
use crate::text::SparseVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSubsample {
    /// `ceil(sqrt(V))` candidate features per split.
    Sqrt,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestHyper {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub seed: u64,
    pub bootstrap: bool,
    pub max_features: FeatureSubsample,
}

impl Default for ForestHyper {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 32,
            min_leaf: 1,
            seed: 0,
            bootstrap: true,
            max_features: FeatureSubsample::Sqrt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
}

impl RandomForest {
    pub(crate) fn predict(&self, x: &SparseVector, n_classes: usize) -> usize {
        let mut votes = vec![0usize; n_classes];
        for t in &self.trees {
            votes[t.predict(x)] += 1;
        }
        argmax_counts(&votes)
    }
}

pub(crate) fn fit(
    x: &[SparseVector],
    y: &[usize],
    n_classes: usize,
    dim: usize,
    hyper: &ForestHyper,
) -> Result<RandomForest, BaselineError> {
    if hyper.n_trees == 0 {
        return Err(BaselineError::InvalidHyper("n_trees must be >= 1".into()));
    }
    let tree_hyper = TreeHyper { max_depth: hyper.max_depth, min_leaf: hyper.min_leaf };
    let draw = match hyper.max_features {
        FeatureSubsample::Sqrt => FeatureDraw::Sqrt { vocab: dim },
        FeatureSubsample::All => FeatureDraw::All,
    };
    let mut master = ChaCha8Rng::seed_from_u64(hyper.seed);
    let n = x.len();
    let trees = (0..hyper.n_trees)
        .map(|_| {
            let mut rng = ChaCha8Rng::seed_from_u64(master.next_u64());
            let samples: Vec<usize> = if hyper.bootstrap {
                let mut s: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                s.sort_unstable();
                s
            } else {
                (0..n).collect()
            };
            Grower { x, y, n_classes, hyper: &tree_hyper, draw, rng: &mut rng }.grow(&samples)
        })
        .collect();
    Ok(RandomForest { trees })
}
