//! Random forest: bagged CART trees with per-node feature subsampling.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::tree::{FeatureSampler, Tree, TreeParams};
use super::{argmax_count, LearnError, Samples};
use crate::exec::Executor;
use crate::seed::rng_for;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features tried per node; `None` means `⌈√D⌉`.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_features: None,
            bootstrap: true,
            max_depth: None,
            min_samples_split: 2,
        }
    }
}

impl ForestParams {
    pub fn tree(&self) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            min_samples_split: self.min_samples_split,
        }
    }

    pub fn features_per_node(&self, dim: usize) -> usize {
        self.max_features
            .unwrap_or_else(|| libm::ceil(libm::sqrt(dim as f64)) as usize)
            .clamp(1, dim.max(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Forest {
    n_classes: usize,
    trees: Vec<Tree>,
}

impl Forest {
    /// Tree `i` draws from `derive_seed(seed, "tree", i)`.
    pub fn fit<E: Executor>(
        params: &ForestParams,
        data: &Samples<'_>,
        seed: u64,
        exec: &E,
    ) -> Result<Self, LearnError> {
        if params.n_trees == 0 {
            return Err(LearnError::BadParameter("n_trees"));
        }
        if params.max_features == Some(0) {
            return Err(LearnError::BadParameter("max_features"));
        }
        let tree_params = params.tree();
        Tree::check(&tree_params)?;
        let m = params.features_per_node(data.dim);
        let n = data.len();
        let trees = exec.map(params.n_trees, |i| {
            let mut rng = rng_for(seed, "tree", i as u64);
            let rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            Tree::build(&tree_params, data, rows, &mut FeatureSampler::Random { m, rng })
        });
        Ok(Self {
            n_classes: data.n_classes,
            trees,
        })
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn predict(&self, row: &[f64]) -> usize {
        let mut votes = vec![0usize; self.n_classes];
        for t in &self.trees {
            votes[t.predict(row)] += 1;
        }
        argmax_count(&votes)
    }
}
