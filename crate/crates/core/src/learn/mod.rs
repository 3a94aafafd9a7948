//! Classifier families behind one train/predict contract.
//!
//! | family              | multiclass       | randomness                    |
//! |---------------------|------------------|-------------------------------|
//! | `nearest_neighbors` | native vote      | none                          |
//! | `decision_tree`     | native           | none                          |
//! | `random_forest`     | native vote      | bootstrap + feature subsets   |
//! | `linear`            | softmax          | none                          |
//! | `svm_rbf`           | one-vs-rest      | SMO partner scan start points |
//!
//! Every tie (votes, scores) resolves to the lowest label id.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::exec::Executor;
use crate::features::FeatureMatrix;
use crate::types::TaskId;

pub mod forest;
pub mod knn;
pub mod linear;
pub mod svm;
pub mod tree;

pub use forest::ForestParams;
pub use knn::KnnParams;
pub use linear::LinearParams;
pub use svm::SvmParams;
pub use tree::TreeParams;

#[derive(Debug, Clone, PartialEq)]
pub enum LearnError {
    EmptyData,
    SingleClassData,
    DimensionMismatch { expected: usize, found: usize },
    NonFinite,
    ZeroTotal,
    BadParameter(&'static str),
}

impl fmt::Display for LearnError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LearnError::EmptyData => write!(f, "training data is empty"),
            LearnError::SingleClassData => write!(f, "training data holds fewer than two classes"),
            LearnError::DimensionMismatch { expected, found } => {
                write!(f, "feature dimension mismatch: model expects {expected}, got {found}")
            }
            LearnError::NonFinite => write!(f, "features must be finite"),
            LearnError::ZeroTotal => write!(f, "class counts sum to zero"),
            LearnError::BadParameter(p) => write!(f, "hyperparameter {p} is out of bounds"),
        }
    }
}

impl core::error::Error for LearnError {}

/// Classifier families, declared in registry order (the order used to break
/// ranking ties).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Family {
    RandomForest,
    SvmRbf,
    NearestNeighbors,
    DecisionTree,
    Linear,
}

impl Family {
    pub const REGISTRY: [Family; 5] = [
        Family::RandomForest,
        Family::SvmRbf,
        Family::NearestNeighbors,
        Family::DecisionTree,
        Family::Linear,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::RandomForest => "random_forest",
            Family::SvmRbf => "svm_rbf",
            Family::NearestNeighbors => "nearest_neighbors",
            Family::DecisionTree => "decision_tree",
            Family::Linear => "linear",
        }
    }

    /// Position in [`Family::REGISTRY`].
    pub fn rank(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = String;

    /// Canonical names plus the short forms `knn`, `tree`, `forest`, `svm`.
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "random_forest" | "forest" => Family::RandomForest,
            "svm_rbf" | "svm" => Family::SvmRbf,
            "nearest_neighbors" | "knn" => Family::NearestNeighbors,
            "decision_tree" | "tree" => Family::DecisionTree,
            "linear" => Family::Linear,
            other => return Err(alloc::format!("unknown model family {other:?}")),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "family", rename_all = "snake_case"))]
pub enum ModelKind {
    NearestNeighbors(KnnParams),
    DecisionTree(TreeParams),
    RandomForest(ForestParams),
    Linear(LinearParams),
    SvmRbf(SvmParams),
}

impl ModelKind {
    pub fn family(&self) -> Family {
        match self {
            ModelKind::NearestNeighbors(_) => Family::NearestNeighbors,
            ModelKind::DecisionTree(_) => Family::DecisionTree,
            ModelKind::RandomForest(_) => Family::RandomForest,
            ModelKind::Linear(_) => Family::Linear,
            ModelKind::SvmRbf(_) => Family::SvmRbf,
        }
    }
}

/// A named, fully parameterized classifier configuration.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelSpec {
    pub name: String,
    pub kind: ModelKind,
    /// Purpose string fed to [`crate::derive_seed`] for this spec.
    pub seed_purpose: String,
}

impl ModelSpec {
    /// Named after its family.
    pub fn new(kind: ModelKind) -> Self {
        let name = kind.family().name().to_string();
        Self {
            seed_purpose: name.clone(),
            name,
            kind,
        }
    }

    pub fn family(&self) -> Family {
        self.kind.family()
    }
}

/// Borrowed training rows with labels mapped to class indices.
#[derive(Debug, Clone, Copy)]
pub struct Samples<'a> {
    pub x: &'a [f64],
    pub dim: usize,
    /// Class index per row into the model's sorted class list.
    pub y: &'a [usize],
    pub n_classes: usize,
}

impl Samples<'_> {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "family", rename_all = "snake_case"))]
pub enum ModelState {
    NearestNeighbors(knn::Knn),
    DecisionTree(tree::Tree),
    RandomForest(forest::Forest),
    Linear(linear::Linear),
    SvmRbf(svm::OneVsRest),
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainedModel {
    pub spec: ModelSpec,
    /// Label ids seen in training, ascending; state refers to them by index.
    pub classes: Vec<TaskId>,
    pub dim: usize,
    pub state: ModelState,
}

/// Index of the largest count; ties go to the lowest index.
pub(crate) fn argmax_count(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

/// Index of the largest score; ties go to the lowest index.
pub(crate) fn argmax_score(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Fits `spec` on every row of `data`. Deterministic in `(spec, data, seed)`
/// for any executor.
pub fn train<E: Executor>(
    spec: &ModelSpec,
    data: &FeatureMatrix,
    seed: u64,
    exec: &E,
) -> Result<TrainedModel, LearnError> {
    train_rows(spec, data.values(), data.dim(), data.labels(), seed, exec)
}

/// As [`train`], over raw row-major values.
pub fn train_rows<E: Executor>(
    spec: &ModelSpec,
    x: &[f64],
    dim: usize,
    labels: &[TaskId],
    seed: u64,
    exec: &E,
) -> Result<TrainedModel, LearnError> {
    if labels.is_empty() {
        return Err(LearnError::EmptyData);
    }
    if dim == 0 || x.len() != labels.len() * dim {
        return Err(LearnError::DimensionMismatch {
            expected: labels.len() * dim,
            found: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(LearnError::NonFinite);
    }
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(LearnError::SingleClassData);
    }
    let y: Vec<usize> = labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label is in class list"))
        .collect();
    let data = Samples {
        x,
        dim,
        y: &y,
        n_classes: classes.len(),
    };
    let state = match &spec.kind {
        ModelKind::NearestNeighbors(p) => ModelState::NearestNeighbors(knn::Knn::fit(p, &data)?),
        ModelKind::DecisionTree(p) => ModelState::DecisionTree(tree::Tree::fit(p, &data)?),
        ModelKind::RandomForest(p) => ModelState::RandomForest(forest::Forest::fit(p, &data, seed, exec)?),
        ModelKind::Linear(p) => ModelState::Linear(linear::Linear::fit(p, &data)?),
        ModelKind::SvmRbf(p) => ModelState::SvmRbf(svm::OneVsRest::fit(p, &data, seed, exec)?),
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        classes,
        dim,
        state,
    })
}

impl TrainedModel {
    /// Class index for one finite row of the training dimension.
    fn predict_index(&self, row: &[f64]) -> usize {
        match &self.state {
            ModelState::NearestNeighbors(m) => m.predict(row),
            ModelState::DecisionTree(m) => m.predict(row),
            ModelState::RandomForest(m) => m.predict(row),
            ModelState::Linear(m) => m.predict(row),
            ModelState::SvmRbf(m) => m.predict(row),
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> Result<TaskId, LearnError> {
        if row.len() != self.dim {
            return Err(LearnError::DimensionMismatch {
                expected: self.dim,
                found: row.len(),
            });
        }
        Ok(self.classes[self.predict_index(row)])
    }
}

/// One label per row of the row-major `values` (`N × dim`).
pub fn predict(model: &TrainedModel, values: &[f64], dim: usize) -> Result<Vec<TaskId>, LearnError> {
    if dim != model.dim || !values.len().is_multiple_of(dim.max(1)) {
        return Err(LearnError::DimensionMismatch {
            expected: model.dim,
            found: dim,
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(LearnError::NonFinite);
    }
    Ok(values
        .chunks(dim)
        .map(|row| model.classes[model.predict_index(row)])
        .collect())
}

pub fn predict_matrix(model: &TrainedModel, m: &FeatureMatrix) -> Result<Vec<TaskId>, LearnError> {
    predict(model, m.values(), m.dim())
}

/// `1 − Σ (c_i / n)²`.
pub fn gini_impurity(class_counts: &[usize]) -> Result<f64, LearnError> {
    let n: usize = class_counts.iter().sum();
    if n == 0 {
        return Err(LearnError::ZeroTotal);
    }
    let n = n as f64;
    Ok(1.0
        - class_counts
            .iter()
            .map(|&c| (c as f64 / n) * (c as f64 / n))
            .sum::<f64>())
}

/// `exp(−γ‖x − y‖²)`.
pub fn rbf_kernel(x: &[f64], y: &[f64], gamma: f64) -> f64 {
    libm::exp(-gamma * squared_distance(x, y))
}

pub(crate) fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}
