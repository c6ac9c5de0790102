use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::argmax_counts;
use crate::text::SparseVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeHyper {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeHyper {
    fn default() -> Self {
        Self { max_depth: 32, min_leaf: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        class: usize,
        counts: Vec<usize>,
    },
    /// Samples with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Binary tree grown greedily by information gain. `nodes[0]` is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    pub(crate) fn predict(&self, x: &SparseVector) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { class, .. } => return *class,
                Node::Split { feature, threshold, left, right } => {
                    at = if x.get(*feature) <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

/// How many candidate features each split examines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum FeatureDraw {
    All,
    /// `ceil(sqrt(V))` features drawn from those active (nonzero) at the node.
    Sqrt {
        vocab: usize,
    },
}

pub(crate) struct Grower<'a, R> {
    pub x: &'a [SparseVector],
    pub y: &'a [usize],
    pub n_classes: usize,
    pub hyper: &'a TreeHyper,
    pub draw: FeatureDraw,
    pub rng: &'a mut R,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

pub(crate) fn entropy(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

fn class_counts(y: &[usize], samples: &[usize], n_classes: usize) -> Vec<usize> {
    let mut counts = vec![0; n_classes];
    for &s in samples {
        counts[y[s]] += 1;
    }
    counts
}

impl<R: Rng> Grower<'_, R> {
    pub fn grow(&mut self, samples: &[usize]) -> DecisionTree {
        let mut nodes = Vec::new();
        self.build(samples, 0, &mut nodes);
        DecisionTree { nodes }
    }

    fn build(&mut self, samples: &[usize], depth: usize, nodes: &mut Vec<Node>) -> usize {
        let counts = class_counts(self.y, samples, self.n_classes);
        let at = nodes.len();
        nodes.push(Node::Leaf { class: argmax_counts(&counts), counts: counts.clone() });
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.hyper.max_depth || samples.len() < 2 * self.hyper.min_leaf.max(1) {
            return at;
        }
        let Some(choice) = self.best_split(samples, &counts) else {
            return at;
        };
        let (left, right): (Vec<usize>, Vec<usize>) =
            samples.iter().partition(|&&s| self.x[s].get(choice.feature) <= choice.threshold);
        let l = self.build(&left, depth + 1, nodes);
        let r = self.build(&right, depth + 1, nodes);
        nodes[at] = Node::Split { feature: choice.feature, threshold: choice.threshold, left: l, right: r };
        at
    }

    /// Highest-gain threshold split over the candidate features. Zero-gain
    /// splits are accepted for impure nodes so XOR-like structure can be
    /// separated at deeper levels. Ties keep the lowest feature, then the
    /// lowest threshold.
    pub fn best_split(&mut self, samples: &[usize], totals: &[usize]) -> Option<SplitChoice> {
        let mut columns: BTreeMap<usize, Vec<(f64, usize)>> = BTreeMap::new();
        for &s in samples {
            for &(j, v) in self.x[s].entries() {
                columns.entry(j).or_default().push((v, self.y[s]));
            }
        }
        let mut features: Vec<usize> = columns.keys().copied().collect();
        if let FeatureDraw::Sqrt { vocab } = self.draw {
            let m = ((vocab as f64).sqrt().ceil() as usize).max(1);
            if m < features.len() {
                let mut picked: Vec<usize> =
                    rand::seq::index::sample(self.rng, features.len(), m).into_iter().map(|k| features[k]).collect();
                picked.sort_unstable();
                features = picked;
            }
        }

        let n = samples.len();
        let parent = entropy(totals);
        let min_leaf = self.hyper.min_leaf.max(1);
        let mut best: Option<SplitChoice> = None;
        for f in features {
            let mut values = columns.remove(&f).unwrap_or_default();
            // implicit zeros: everything not stored in the sparse column
            let mut zero_counts = totals.to_vec();
            for &(_, c) in &values {
                zero_counts[c] -= 1;
            }
            let zeros: usize = zero_counts.iter().sum();
            values.sort_by(|a, b| a.0.total_cmp(&b.0));
            let zero_at = values.partition_point(|(v, _)| *v < 0.0);

            // walk distinct values in ascending order, zero block inserted at its place
            let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
            let push = |v: f64, counts: &[usize], groups: &mut Vec<(f64, Vec<usize>)>| match groups.last_mut() {
                Some((last, acc)) if *last == v => acc.iter_mut().zip(counts).for_each(|(a, c)| *a += c),
                _ => groups.push((v, counts.to_vec())),
            };
            let mut one = vec![0usize; self.n_classes];
            for (k, &(v, c)) in values.iter().enumerate() {
                if k == zero_at && zeros > 0 {
                    push(0.0, &zero_counts, &mut groups);
                }
                one.iter_mut().for_each(|x| *x = 0);
                one[c] = 1;
                push(v, &one, &mut groups);
            }
            if zero_at == values.len() && zeros > 0 {
                push(0.0, &zero_counts, &mut groups);
            }

            let mut left = vec![0usize; self.n_classes];
            let mut left_n = 0usize;
            for w in groups.windows(2) {
                left.iter_mut().zip(&w[0].1).for_each(|(a, c)| *a += c);
                left_n += w[0].1.iter().sum::<usize>();
                let right_n = n - left_n;
                if left_n < min_leaf || right_n < min_leaf {
                    continue;
                }
                let right: Vec<usize> = totals.iter().zip(&left).map(|(t, l)| t - l).collect();
                let gain = parent
                    - (left_n as f64 / n as f64) * entropy(&left)
                    - (right_n as f64 / n as f64) * entropy(&right);
                let threshold = midpoint(w[0].0, w[1].0);
                if best.is_none_or(|b| gain > b.gain + 1e-12) {
                    best = Some(SplitChoice { feature: f, threshold, gain });
                }
            }
        }
        best
    }
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    // guard against rounding up to `b` for adjacent floats
    if m >= b {
        a
    } else {
        m
    }
}
