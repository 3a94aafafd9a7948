//! Cross-validation, scoring and top-two model selection.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use rand::seq::SliceRandom;

use crate::config::CvMode;
use crate::exec::Executor;
use crate::features::{FeatureMatrix, Standardizer};
use crate::learn::{self, LearnError, ModelSpec};
use crate::seed::{derive_seed, rng_for};
use crate::types::TaskId;

#[derive(Debug, Clone, PartialEq)]
pub enum EvalError {
    TooFewSessions(usize),
    BadK { k: usize, rows: usize },
    TooFewModels(usize),
    LengthMismatch { designed: usize, predicted: usize },
    LabelOutOfRange { label: TaskId, tasks: usize },
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::TooFewSessions(n) => {
                write!(f, "leave-one-session-out needs at least 2 sessions, found {n}")
            }
            EvalError::BadK { k, rows } => write!(f, "k-fold needs 2 <= k <= {rows}, got k = {k}"),
            EvalError::TooFewModels(n) => write!(f, "need at least 2 scored models, got {n}"),
            EvalError::LengthMismatch { designed, predicted } => {
                write!(f, "{designed} designed labels but {predicted} predicted labels")
            }
            EvalError::LabelOutOfRange { label, tasks } => {
                write!(f, "label {label} is outside the {tasks}-task vocabulary")
            }
        }
    }
}

impl core::error::Error for EvalError {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// Held-out session for leave-one-session-out folds.
    pub session: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CvPlan {
    pub mode: CvMode,
    pub folds: Vec<Fold>,
}

/// Leave-one-session-out: fold `i` tests the `i`-th session in ascending
/// order. k-fold: rows shuffled with `derive_seed(seed, "kfold", 0)`, then
/// cut into `k` contiguous parts whose sizes differ by at most one (the
/// first `N mod k` parts are larger). Index lists are ascending.
pub fn make_cv_plan(matrix: &FeatureMatrix, mode: CvMode, seed: u64) -> Result<CvPlan, EvalError> {
    let n = matrix.len();
    let all = 0..n;
    let folds = match mode {
        CvMode::LeaveOneSessionOut => {
            let sessions = matrix.session_ids();
            if sessions.len() < 2 {
                return Err(EvalError::TooFewSessions(sessions.len()));
            }
            sessions
                .into_iter()
                .map(|s| {
                    let (test, train) = all.clone().partition(|&i| matrix.sessions()[i] == s);
                    Fold {
                        train,
                        test,
                        session: Some(s),
                    }
                })
                .collect()
        }
        CvMode::KFold(k) => {
            if k < 2 || k > n {
                return Err(EvalError::BadK { k, rows: n });
            }
            let mut order: Vec<usize> = all.clone().collect();
            order.shuffle(&mut rng_for(seed, "kfold", 0));
            let (base, extra) = (n / k, n % k);
            let mut start = 0;
            (0..k)
                .map(|f| {
                    let len = base + usize::from(f < extra);
                    let mut test = order[start..start + len].to_vec();
                    start += len;
                    test.sort_unstable();
                    let mut in_test = vec![false; n];
                    for &i in &test {
                        in_test[i] = true;
                    }
                    let train = all.clone().filter(|&i| !in_test[i]).collect();
                    Fold {
                        train,
                        test,
                        session: None,
                    }
                })
                .collect()
        }
    };
    Ok(CvPlan { mode, folds })
}

/// Designed-by-predicted counts: `counts[designed][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    tasks: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn zeros(tasks: usize) -> Self {
        Self {
            tasks,
            counts: vec![0; tasks * tasks],
        }
    }

    pub fn from_counts(tasks: usize, counts: Vec<u64>) -> Option<Self> {
        (counts.len() == tasks * tasks).then_some(Self { tasks, counts })
    }

    pub fn tasks(&self) -> usize {
        self.tasks
    }

    pub fn get(&self, designed: usize, predicted: usize) -> u64 {
        self.counts[designed * self.tasks + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.tasks).map(|i| self.get(i, i)).sum()
    }

    pub fn max(&self) -> u64 {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    /// Sum over predictions for one designed task.
    pub fn designed_total(&self, designed: usize) -> u64 {
        (0..self.tasks).map(|p| self.get(designed, p)).sum()
    }

    /// `trace / total`, or 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        let t = self.total();
        if t == 0 {
            0.0
        } else {
            self.trace() as f64 / t as f64
        }
    }

    pub fn add(&mut self, other: &ConfusionMatrix) {
        assert_eq!(self.tasks, other.tasks);
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    fn record(&mut self, designed: TaskId, predicted: TaskId) -> Result<(), EvalError> {
        for label in [designed, predicted] {
            if usize::from(label) >= self.tasks {
                return Err(EvalError::LabelOutOfRange {
                    label,
                    tasks: self.tasks,
                });
            }
        }
        self.counts[usize::from(designed) * self.tasks + usize::from(predicted)] += 1;
        Ok(())
    }
}

pub fn confusion(designed: &[TaskId], predicted: &[TaskId], tasks: usize) -> Result<ConfusionMatrix, EvalError> {
    if designed.len() != predicted.len() {
        return Err(EvalError::LengthMismatch {
            designed: designed.len(),
            predicted: predicted.len(),
        });
    }
    let mut m = ConfusionMatrix::zeros(tasks);
    for (&d, &p) in designed.iter().zip(predicted) {
        m.record(d, p)?;
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelScore {
    pub spec: ModelSpec,
    /// Per fold, in plan order; `None` where training failed.
    pub fold_accuracies: Vec<Option<f64>>,
    pub failures: Vec<(usize, LearnError)>,
    /// Mean over folds that trained; 0 when none did.
    pub mean_accuracy: f64,
    /// Pooled over successful folds.
    pub confusion: ConfusionMatrix,
    /// Out-of-fold prediction for every row of the matrix.
    pub predictions: Vec<Option<TaskId>>,
}

struct FoldRun {
    predictions: Vec<TaskId>,
    accuracy: f64,
}

fn run_fold<E: Executor>(
    spec: &ModelSpec,
    matrix: &FeatureMatrix,
    fold: &crate::eval::Fold,
    seed: u64,
    exec: &E,
) -> Result<FoldRun, LearnError> {
    let train = matrix.select(&fold.train);
    let scaler = Standardizer::fit(&train);
    let train_x = scaler.transform_values(train.values());
    let model = learn::train_rows(spec, &train_x, matrix.dim(), train.labels(), seed, exec)?;
    let test = matrix.select(&fold.test);
    let predictions = learn::predict(&model, &scaler.transform_values(test.values()), matrix.dim())?;
    let hits = predictions.iter().zip(test.labels()).filter(|(p, d)| p == d).count();
    let accuracy = if predictions.is_empty() {
        0.0
    } else {
        hits as f64 / predictions.len() as f64
    };
    Ok(FoldRun { predictions, accuracy })
}

/// Trains and scores every spec on every fold. Each fold normalizes with
/// training-row statistics only and seeds the model with
/// `derive_seed(master_seed, spec.seed_purpose, fold)`. Failed folds are
/// recorded without stopping other work.
pub fn cross_validate<E: Executor>(
    specs: &[ModelSpec],
    matrix: &FeatureMatrix,
    plan: &CvPlan,
    master_seed: u64,
    tasks: usize,
    exec: &E,
) -> Vec<ModelScore> {
    let folds = plan.folds.len();
    let runs = exec.map(specs.len() * folds, |job| {
        let (s, f) = (job / folds, job % folds);
        let spec = &specs[s];
        let seed = derive_seed(master_seed, &spec.seed_purpose, f as u64);
        run_fold(spec, matrix, &plan.folds[f], seed, exec)
    });
    let mut runs = runs.into_iter();
    specs
        .iter()
        .map(|spec| {
            let mut score = ModelScore {
                spec: spec.clone(),
                fold_accuracies: Vec::with_capacity(folds),
                failures: Vec::new(),
                mean_accuracy: 0.0,
                confusion: ConfusionMatrix::zeros(tasks),
                predictions: vec![None; matrix.len()],
            };
            for (f, fold) in plan.folds.iter().enumerate() {
                match runs.next().expect("one run per job") {
                    Ok(run) => {
                        let designed: Vec<TaskId> = fold.test.iter().map(|&i| matrix.labels()[i]).collect();
                        match confusion(&designed, &run.predictions, tasks) {
                            Ok(c) => score.confusion.add(&c),
                            Err(_) => {
                                // labels beyond the vocabulary: keep accuracy, skip pooling
                            }
                        }
                        for (&row, &p) in fold.test.iter().zip(&run.predictions) {
                            score.predictions[row] = Some(p);
                        }
                        score.fold_accuracies.push(Some(run.accuracy));
                    }
                    Err(e) => {
                        score.fold_accuracies.push(None);
                        score.failures.push((f, e));
                    }
                }
            }
            let ok: Vec<f64> = score.fold_accuracies.iter().flatten().copied().collect();
            if !ok.is_empty() {
                score.mean_accuracy = ok.iter().sum::<f64>() / ok.len() as f64;
            }
            score
        })
        .collect()
}

/// Ranking order: higher mean accuracy first, then registry order of the
/// family, then spec name.
pub fn rank_order(a: &ModelScore, b: &ModelScore) -> Ordering {
    b.mean_accuracy
        .total_cmp(&a.mean_accuracy)
        .then(a.spec.family().rank().cmp(&b.spec.family().rank()))
        .then(a.spec.name.cmp(&b.spec.name))
}

pub fn select_top_two(scores: &[ModelScore]) -> Result<(&ModelScore, &ModelScore), EvalError> {
    if scores.len() < 2 {
        return Err(EvalError::TooFewModels(scores.len()));
    }
    let mut ranked: Vec<&ModelScore> = scores.iter().collect();
    ranked.sort_by(|a, b| rank_order(a, b));
    Ok((ranked[0], ranked[1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ModelParams;
    use crate::exec::Sequential;
    use crate::learn::Family;
    use alloc::string::ToString;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn matrix_with_sessions(sessions: &[u32]) -> FeatureMatrix {
        let n = sessions.len();
        FeatureMatrix::new(
            1,
            (0..n).map(|i| i as f64).collect(),
            (0..n).map(|i| (i % 2) as TaskId).collect(),
            (0..n).map(|i| i as f64).collect(),
            sessions.to_vec(),
        )
        .unwrap()
    }

    fn score(family: Family, mean: f64) -> ModelScore {
        ModelScore {
            spec: ModelParams::default().spec(family),
            fold_accuracies: vec![Some(mean)],
            failures: vec![],
            mean_accuracy: mean,
            confusion: ConfusionMatrix::zeros(2),
            predictions: vec![],
        }
    }

    #[test]
    fn loso_six_sessions() {
        let sessions: Vec<u32> = (0..60).map(|i| (i / 10 + 1) as u32).collect();
        let m = matrix_with_sessions(&sessions);
        let plan = make_cv_plan(&m, CvMode::LeaveOneSessionOut, 0).unwrap();
        assert_eq!(plan.folds.len(), 6);
        for (i, f) in plan.folds.iter().enumerate() {
            assert_eq!(f.session, Some(i as u32 + 1));
            assert_eq!(f.test, (i * 10..i * 10 + 10).collect::<Vec<_>>());
            assert_eq!(f.train.len(), 50);
        }
        let one = matrix_with_sessions(&[1, 1, 1]);
        assert_eq!(
            make_cv_plan(&one, CvMode::LeaveOneSessionOut, 0),
            Err(EvalError::TooFewSessions(1))
        );
    }

    #[test]
    fn kfold_sizes_and_errors() {
        let m = matrix_with_sessions(&[1; 10]);
        let plan = make_cv_plan(&m, CvMode::KFold(3), 9).unwrap();
        let sizes: Vec<usize> = plan.folds.iter().map(|f| f.test.len()).collect();
        assert_eq!(sizes, vec![4, 3, 3]);
        assert!(matches!(
            make_cv_plan(&m, CvMode::KFold(11), 0),
            Err(EvalError::BadK { .. })
        ));
        assert!(matches!(
            make_cv_plan(&m, CvMode::KFold(1), 0),
            Err(EvalError::BadK { .. })
        ));
        assert_eq!(make_cv_plan(&m, CvMode::KFold(3), 9), Ok(plan));
    }

    proptest! {
        #[test]
        fn folds_partition_rows(n in 2usize..200, k_frac in 0.0f64..1.0, seed in any::<u64>()) {
            let k = 2 + ((n - 2) as f64 * k_frac) as usize;
            let m = matrix_with_sessions(&vec![1; n]);
            let plan = make_cv_plan(&m, CvMode::KFold(k), seed).unwrap();
            let mut seen = vec![0u32; n];
            for f in &plan.folds {
                for &i in &f.test { seen[i] += 1; }
                let mut both = f.train.clone();
                both.extend(&f.test);
                both.sort_unstable();
                prop_assert_eq!(both, (0..n).collect::<Vec<_>>());
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
            let sizes: Vec<usize> = plan.folds.iter().map(|f| f.test.len()).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
    }

    #[test]
    fn top_two_examples() {
        let s = [
            score(Family::RandomForest, 0.90),
            score(Family::SvmRbf, 0.85),
            score(Family::NearestNeighbors, 0.70),
        ];
        let (a, b) = select_top_two(&s).unwrap();
        assert_eq!(
            (a.spec.family(), b.spec.family()),
            (Family::RandomForest, Family::SvmRbf)
        );

        let tied = [
            score(Family::Linear, 0.8),
            score(Family::SvmRbf, 0.8),
            score(Family::DecisionTree, 0.5),
        ];
        let (a, b) = select_top_two(&tied).unwrap();
        assert_eq!((a.spec.family(), b.spec.family()), (Family::SvmRbf, Family::Linear));

        let two = [score(Family::DecisionTree, 0.6), score(Family::NearestNeighbors, 0.7)];
        let (a, b) = select_top_two(&two).unwrap();
        assert_eq!(
            (a.spec.family(), b.spec.family()),
            (Family::NearestNeighbors, Family::DecisionTree)
        );

        assert_eq!(select_top_two(&two[..1]).unwrap_err(), EvalError::TooFewModels(1));
    }

    #[test]
    fn tied_family_falls_back_to_name() {
        let mut a = score(Family::SvmRbf, 0.5);
        a.spec.name = "svm_b".to_string();
        let mut b = score(Family::SvmRbf, 0.5);
        b.spec.name = "svm_a".to_string();
        let s = [a, b];
        assert_eq!(select_top_two(&s).unwrap().0.spec.name, "svm_a");
    }

    proptest! {
        #[test]
        fn selection_invariant_under_positive_affine_maps(
            means in proptest::collection::vec(0.0f64..1.0, 5),
            scale in 0.01f64..10.0,
            shift in -5.0f64..5.0,
        ) {
            let base: Vec<ModelScore> = Family::REGISTRY.iter().zip(&means).map(|(f, m)| score(*f, *m)).collect();
            let moved: Vec<ModelScore> = base.iter().map(|s| ModelScore { mean_accuracy: s.mean_accuracy * scale + shift, ..s.clone() }).collect();
            let (a, b) = select_top_two(&base).unwrap();
            let (c, d) = select_top_two(&moved).unwrap();
            // exact ties can be created or broken by rounding; only compare tie-free draws
            let mut sorted = means.clone();
            sorted.sort_by(|x, y| y.total_cmp(x));
            prop_assume!(sorted[0] - sorted[1] > 1e-9 && sorted[1] - sorted[2] > 1e-9);
            prop_assert_eq!(&a.spec.name, &c.spec.name);
            prop_assert_eq!(&b.spec.name, &d.spec.name);
        }
    }

    #[test]
    fn confusion_examples() {
        let d = [0, 1, 2, 1, 0];
        let m = confusion(&d, &d, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m.get(i, j) > 0, i == j && m.get(i, j) > 0);
                if i != j {
                    assert_eq!(m.get(i, j), 0);
                }
            }
        }
        assert_eq!(m.accuracy(), 1.0);
        let m = confusion(&d, &[0; 5], 3).unwrap();
        assert!((0..3).all(|i| m.get(i, 1) == 0 && m.get(i, 2) == 0));
        assert_eq!(m.total(), 5);
        assert!(matches!(
            confusion(&d, &[0; 4], 3),
            Err(EvalError::LengthMismatch { .. })
        ));
        assert!(matches!(
            confusion(&[3], &[0], 3),
            Err(EvalError::LabelOutOfRange { .. })
        ));
    }

    #[test]
    fn confusion_matches_naive_tally() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let n = rng.random_range(0..300);
            let d: Vec<TaskId> = (0..n).map(|_| rng.random_range(0..5)).collect();
            let p: Vec<TaskId> = (0..n).map(|_| rng.random_range(0..5)).collect();
            let m = confusion(&d, &p, 5).unwrap();
            for i in 0..5u16 {
                for j in 0..5u16 {
                    let naive = d.iter().zip(&p).filter(|(a, b)| **a == i && **b == j).count() as u64;
                    assert_eq!(m.get(usize::from(i), usize::from(j)), naive);
                }
            }
            assert_eq!(m.total(), n as u64);
        }
    }

    #[test]
    fn constant_features_score_majority_share() {
        // Features carry no information: the tree is a single majority leaf.
        let sessions: Vec<u32> = (0..40).map(|i| (i / 20 + 1) as u32).collect();
        let labels: Vec<TaskId> = (0..40).map(|i| if i % 20 < 14 { 0 } else { 1 }).collect();
        let m = FeatureMatrix::new(
            1,
            vec![3.0; 40],
            labels.clone(),
            (0..40).map(f64::from).collect(),
            sessions,
        )
        .unwrap();
        let plan = make_cv_plan(&m, CvMode::LeaveOneSessionOut, 0).unwrap();
        let spec = ModelParams::default().spec(Family::DecisionTree);
        let scores = cross_validate(&[spec], &m, &plan, 0, 2, &Sequential);
        let share = 14.0 / 20.0;
        assert_eq!(scores[0].fold_accuracies, vec![Some(share), Some(share)]);
        assert_eq!(scores[0].mean_accuracy, share);
        assert_eq!(scores[0].confusion.total(), 40);
    }

    #[test]
    fn failed_folds_are_recorded_per_spec() {
        // session 2 contains only class 0, so training without session 1 fails
        let sessions = [1, 1, 1, 1, 2, 2];
        let labels = [0, 1, 0, 1, 0, 0];
        let m = FeatureMatrix::new(
            1,
            vec![0.0, 5.0, 0.1, 5.1, 0.2, 0.3],
            labels.to_vec(),
            vec![0.0; 6],
            sessions.to_vec(),
        )
        .unwrap();
        let plan = make_cv_plan(&m, CvMode::LeaveOneSessionOut, 0).unwrap();
        let specs = [
            ModelParams::default().spec(Family::NearestNeighbors),
            ModelParams::default().spec(Family::DecisionTree),
        ];
        let scores = cross_validate(&specs, &m, &plan, 0, 2, &Sequential);
        for s in &scores {
            assert_eq!(s.failures, vec![(0, LearnError::SingleClassData)]);
            assert_eq!(s.fold_accuracies[0], None);
            assert_eq!(s.fold_accuracies[1], Some(1.0));
            assert_eq!(s.mean_accuracy, 1.0);
            assert_eq!(s.predictions[..4], [None; 4]);
        }
    }
}
