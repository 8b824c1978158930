use serde::{Deserialize, Serialize};

use crate::applying::features::{distance, FeatureVector};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_NEIGHBORS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor<F> {
    pub vector: FeatureVector<F>,
    pub label: bool,
}

/// k-nearest-neighbor vote over the stored training table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel<F> {
    pub k: usize,
    pub neighbors: Vec<Neighbor<F>>,
}

impl<F: Scalar> KnnModel<F> {
    pub fn fit(vectors: &[&FeatureVector<F>], labels: &[bool], k: usize) -> Result<Self> {
        if k == 0 || k.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!("neighbor count must be odd, got {k}")));
        }
        Ok(KnnModel {
            k,
            neighbors: vectors
                .iter()
                .zip(labels)
                .map(|(v, &label)| Neighbor {
                    vector: (*v).clone(),
                    label,
                })
                .collect(),
        })
    }

    /// Majority label among the k nearest (ties by entity id) and its vote
    /// fraction. With fewer stored rows than k, an even vote split goes to the
    /// nearest neighbor's label.
    pub fn predict(&self, v: &FeatureVector<F>) -> (bool, F) {
        let mut ranked: Vec<(F, &Neighbor<F>)> =
            self.neighbors.iter().map(|n| (distance(v, &n.vector), n)).collect();
        ranked.sort_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.1.vector.entity.cmp(&b.1.vector.entity))
        });
        let top = &ranked[..self.k.min(ranked.len())];
        if top.is_empty() {
            return (false, F::one());
        }
        let yes = top.iter().filter(|(_, n)| n.label).count();
        let no = top.len() - yes;
        let label = if yes == no { top[0].1.label } else { yes > no };
        let votes = if label { yes } else { no };
        (label, F::of(votes as f64 / top.len() as f64))
    }
}
