//! CART classification tree with Gini splits.
//!
//! Thresholds are midpoints between consecutive distinct values of a
//! feature. The split maximizing `Σ l_c²/n_l + Σ r_c²/n_r` (equivalently,
//! minimizing weighted child Gini impurity) wins; ties keep the lowest
//! feature index, then the lowest threshold. A non-pure node is split even
//! when no split lowers impurity, so an unbounded tree fits any consistent
//! training set exactly.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;
use rand_chacha::ChaCha8Rng;

use super::{argmax_count, LearnError, Samples};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TreeParams {
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_split: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Node {
    Leaf {
        class: usize,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Tree {
    nodes: Vec<Node>,
}

/// Which features a node may split on.
#[allow(clippy::large_enum_variant)]
pub(crate) enum FeatureSampler {
    All,
    /// `m` features drawn without replacement per node; when none of them
    /// can split, the remaining features are tried in index order.
    Random {
        m: usize,
        rng: ChaCha8Rng,
    },
}

impl FeatureSampler {
    fn draw(&mut self, dim: usize) -> Vec<usize> {
        match self {
            FeatureSampler::Random { m, rng } if *m < dim => {
                let mut f = index::sample(rng, dim, *m).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..dim).collect(),
        }
    }
}

struct Candidate {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl Tree {
    pub fn fit(params: &TreeParams, data: &Samples<'_>) -> Result<Self, LearnError> {
        Self::check(params)?;
        Ok(Self::build(
            params,
            data,
            (0..data.len()).collect(),
            &mut FeatureSampler::All,
        ))
    }

    pub(crate) fn check(params: &TreeParams) -> Result<(), LearnError> {
        if params.min_samples_split < 2 {
            return Err(LearnError::BadParameter("min_samples_split"));
        }
        if params.max_depth == Some(0) {
            return Err(LearnError::BadParameter("max_depth"));
        }
        Ok(())
    }

    /// Grows a tree on `rows` (duplicates allowed, e.g. a bootstrap sample).
    pub(crate) fn build(
        params: &TreeParams,
        data: &Samples<'_>,
        rows: Vec<usize>,
        sampler: &mut FeatureSampler,
    ) -> Self {
        let mut nodes = vec![Node::Leaf { class: 0 }];
        let mut stack = vec![(0usize, rows, 0usize)];
        while let Some((id, rows, depth)) = stack.pop() {
            let mut counts = vec![0usize; data.n_classes];
            for &r in &rows {
                counts[data.y[r]] += 1;
            }
            let majority = argmax_count(&counts);
            let pure = counts[majority] == rows.len();
            let depth_reached = params.max_depth.is_some_and(|d| depth >= d);
            if pure || depth_reached || rows.len() < params.min_samples_split {
                nodes[id] = Node::Leaf { class: majority };
                continue;
            }

            let drawn = sampler.draw(data.dim);
            let mut best = best_split(data, &rows, &drawn);
            if best.is_none() && drawn.len() < data.dim {
                let rest: Vec<usize> = (0..data.dim).filter(|f| !drawn.contains(f)).collect();
                best = best_split(data, &rows, &rest);
            }
            let Some(best) = best else {
                nodes[id] = Node::Leaf { class: majority };
                continue;
            };

            let (l, r): (Vec<usize>, Vec<usize>) = rows
                .into_iter()
                .partition(|&i| data.row(i)[best.feature] <= best.threshold);
            let left = nodes.len();
            nodes.push(Node::Leaf { class: 0 });
            nodes.push(Node::Leaf { class: 0 });
            nodes[id] = Node::Split {
                feature: best.feature,
                threshold: best.threshold,
                left,
                right: left + 1,
            };
            stack.push((left + 1, r, depth + 1));
            stack.push((left, l, depth + 1));
        }
        Self { nodes }
    }

    pub fn predict(&self, row: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { class } => return *class,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }
}

fn best_split(data: &Samples<'_>, rows: &[usize], features: &[usize]) -> Option<Candidate> {
    let n = rows.len();
    let mut best: Option<Candidate> = None;
    let mut pairs: Vec<(f64, usize)> = Vec::with_capacity(n);
    let mut left = vec![0u64; data.n_classes];
    let mut right = vec![0u64; data.n_classes];

    for &f in features {
        pairs.clear();
        pairs.extend(rows.iter().map(|&r| (data.row(r)[f], data.y[r])));
        pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if pairs[0].0 == pairs[n - 1].0 {
            continue;
        }
        left.fill(0);
        right.fill(0);
        for &(_, c) in &pairs {
            right[c] += 1;
        }
        let mut sq_left: u64 = 0;
        let mut sq_right: u64 = right.iter().map(|c| c * c).sum();
        for i in 0..n - 1 {
            let c = pairs[i].1;
            sq_left += 2 * left[c] + 1;
            sq_right -= 2 * right[c] - 1;
            left[c] += 1;
            right[c] -= 1;
            let (lo, hi) = (pairs[i].0, pairs[i + 1].0);
            if lo == hi {
                continue;
            }
            let n_left = (i + 1) as f64;
            let score = sq_left as f64 / n_left + sq_right as f64 / (n as f64 - n_left);
            if best.as_ref().is_none_or(|b| score > b.score) {
                let mid = lo + (hi - lo) / 2.0;
                // adjacent floats: keep `hi` on the right
                let threshold = if mid < hi { mid } else { lo };
                best = Some(Candidate {
                    feature: f,
                    threshold,
                    score,
                });
            }
        }
    }
    best
}
