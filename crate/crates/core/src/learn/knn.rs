//! Brute-force k-nearest-neighbors with Euclidean distance.

use alloc::vec;
use alloc::vec::Vec;

use super::{argmax_count, squared_distance, LearnError, Samples};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self { k: 5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Knn {
    k: usize,
    dim: usize,
    n_classes: usize,
    x: Vec<f64>,
    y: Vec<usize>,
}

impl Knn {
    pub fn fit(params: &KnnParams, data: &Samples<'_>) -> Result<Self, LearnError> {
        if params.k == 0 {
            return Err(LearnError::BadParameter("k"));
        }
        Ok(Self {
            k: params.k,
            dim: data.dim,
            n_classes: data.n_classes,
            x: data.x.to_vec(),
            y: data.y.to_vec(),
        })
    }

    /// Training rows ordered by (distance, row index), first `k` only.
    pub fn neighbors(&self, row: &[f64]) -> Vec<usize> {
        let mut d: Vec<(f64, usize)> = self
            .x
            .chunks(self.dim)
            .enumerate()
            .map(|(i, t)| (squared_distance(t, row), i))
            .collect();
        let k = self.k.min(d.len());
        let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < d.len() {
            d.select_nth_unstable_by(k - 1, order);
            d.truncate(k);
        }
        d.sort_unstable_by(order);
        d.into_iter().map(|(_, i)| i).collect()
    }

    pub fn predict(&self, row: &[f64]) -> usize {
        let mut votes = vec![0usize; self.n_classes];
        for i in self.neighbors(row) {
            votes[self.y[i]] += 1;
        }
        argmax_count(&votes)
    }
}
