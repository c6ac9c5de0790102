use serde::{Deserialize, Serialize};

use crate::text::SparseVector;

/// k-nearest neighbours under cosine distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearestNeighbors {
    pub k: usize,
    pub points: Vec<SparseVector>,
    pub labels: Vec<usize>,
}

pub fn cosine_distance(a: &SparseVector, b: &SparseVector) -> f64 {
    let denom = a.norm() * b.norm();
    if denom == 0.0 {
        return 1.0;
    }
    1.0 - a.dot(b) / denom
}

impl NearestNeighbors {
    /// Majority label among the `k` closest points (ties in distance keep the
    /// earlier training point). Vote ties go to the class whose nearest
    /// member is closest, then to schema order.
    pub(crate) fn predict(&self, x: &SparseVector, k: usize, n_classes: usize) -> usize {
        let mut dists: Vec<(f64, usize)> =
            self.points.iter().enumerate().map(|(i, p)| (cosine_distance(x, p), i)).collect();
        let k = k.clamp(1, dists.len().max(1));
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < dists.len() {
            dists.select_nth_unstable_by(k - 1, cmp);
            dists.truncate(k);
        }
        dists.sort_by(cmp);

        let mut votes = vec![0usize; n_classes];
        let mut nearest = vec![f64::INFINITY; n_classes];
        for &(d, i) in &dists {
            let c = self.labels[i];
            votes[c] += 1;
            nearest[c] = nearest[c].min(d);
        }
        (0..n_classes)
            .max_by(|&a, &b| votes[a].cmp(&votes[b]).then(nearest[b].total_cmp(&nearest[a])).then(b.cmp(&a)))
            .unwrap_or(0)
    }
}
