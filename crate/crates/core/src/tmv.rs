//! Time majority voting over per-window prediction streams.
//!
//! A stream is cut into consecutive blocks of `block` windows (the last may
//! be shorter) and every prediction in a block becomes the block's majority
//! label, ties going to the lowest label id. Fusing two models pools both
//! streams' votes per block.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::features::FeatureMatrix;
use crate::learn::{self, LearnError, TrainedModel};
use crate::types::TaskId;

pub const FUSED_SOURCE: &str = "fused";

#[derive(Debug, Clone, PartialEq)]
pub enum TmvError {
    LengthMismatch { a: usize, b: usize },
    MissingPrediction { row: usize },
    Predict(LearnError),
}

impl fmt::Display for TmvError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TmvError::LengthMismatch { a, b } => write!(f, "prediction streams differ in length ({a} vs {b})"),
            TmvError::MissingPrediction { row } => write!(f, "no prediction for window row {row}"),
            TmvError::Predict(e) => write!(f, "prediction failed: {e}"),
        }
    }
}

impl core::error::Error for TmvError {}

impl From<LearnError> for TmvError {
    fn from(e: LearnError) -> Self {
        TmvError::Predict(e)
    }
}

fn majority(counts: &mut Vec<usize>, votes: impl Iterator<Item = TaskId>) -> TaskId {
    counts.clear();
    for v in votes {
        let v = usize::from(v);
        if v >= counts.len() {
            counts.resize(v + 1, 0);
        }
        counts[v] += 1;
    }
    learn::argmax_count(counts) as TaskId
}

/// Panics if `block == 0`.
pub fn time_majority_vote(raw: &[TaskId], block: usize) -> Vec<TaskId> {
    assert!(block >= 1, "block must be at least one window");
    let mut counts = Vec::new();
    let mut out = Vec::with_capacity(raw.len());
    for chunk in raw.chunks(block) {
        let winner = majority(&mut counts, chunk.iter().copied());
        out.extend(core::iter::repeat_n(winner, chunk.len()));
    }
    out
}

/// Majority over both streams' votes per block. Panics if `block == 0`.
pub fn fuse_two(a: &[TaskId], b: &[TaskId], block: usize) -> Result<Vec<TaskId>, TmvError> {
    assert!(block >= 1, "block must be at least one window");
    if a.len() != b.len() {
        return Err(TmvError::LengthMismatch { a: a.len(), b: b.len() });
    }
    let mut counts = Vec::new();
    let mut out = Vec::with_capacity(a.len());
    for (ca, cb) in a.chunks(block).zip(b.chunks(block)) {
        let winner = majority(&mut counts, ca.iter().chain(cb).copied());
        out.extend(core::iter::repeat_n(winner, ca.len()));
    }
    Ok(out)
}

/// Fraction of blocks whose smoothed label equals the block's majority
/// designed label. Both streams share the block grid.
pub fn block_accuracy(designed: &[TaskId], smoothed: &[TaskId], block: usize) -> f64 {
    let truth = time_majority_vote(designed, block);
    let blocks = designed.len().div_ceil(block);
    if blocks == 0 {
        return 0.0;
    }
    let hits = (0..blocks).filter(|b| truth[b * block] == smoothed[b * block]).count();
    hits as f64 / blocks as f64
}

/// One model's (or the fusion's) prediction stream for one session.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTrace {
    pub session: u32,
    pub source: String,
    pub window_start: Vec<f64>,
    pub raw: Vec<TaskId>,
    pub smoothed: Vec<TaskId>,
}

impl PredictionTrace {
    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }
}

/// Builds three traces per session (ascending session order): model A,
/// model B, then the fusion. Windows are taken in matrix order within each
/// session. The fused trace's raw labels are the per-window pooled vote
/// (`fuse_two` with one-window blocks).
pub fn traces_from_predictions(
    matrix: &FeatureMatrix,
    a: (&str, &[Option<TaskId>]),
    b: (&str, &[Option<TaskId>]),
    block: usize,
) -> Result<Vec<PredictionTrace>, TmvError> {
    for p in [a.1, b.1] {
        if p.len() != matrix.len() {
            return Err(TmvError::LengthMismatch {
                a: matrix.len(),
                b: p.len(),
            });
        }
    }
    let pick = |preds: &[Option<TaskId>], rows: &[usize]| -> Result<Vec<TaskId>, TmvError> {
        rows.iter()
            .map(|&r| preds[r].ok_or(TmvError::MissingPrediction { row: r }))
            .collect()
    };
    let mut out = Vec::new();
    for session in matrix.session_ids() {
        let rows = matrix.rows_of_session(session);
        let window_start: Vec<f64> = rows.iter().map(|&r| matrix.window_start()[r]).collect();
        let raw_a = pick(a.1, &rows)?;
        let raw_b = pick(b.1, &rows)?;
        let fused_raw = fuse_two(&raw_a, &raw_b, 1)?;
        let fused = fuse_two(&raw_a, &raw_b, block)?;
        for (source, raw) in [(a.0, raw_a), (b.0, raw_b)] {
            out.push(PredictionTrace {
                session,
                source: source.to_string(),
                window_start: window_start.clone(),
                smoothed: time_majority_vote(&raw, block),
                raw,
            });
        }
        out.push(PredictionTrace {
            session,
            source: FUSED_SOURCE.to_string(),
            window_start,
            raw: fused_raw,
            smoothed: fused,
        });
    }
    Ok(out)
}

/// Predicts every window of `matrix` (already normalized for the models)
/// with both models and smooths per session.
pub fn tmv_pipeline(
    model_a: &TrainedModel,
    model_b: &TrainedModel,
    matrix: &FeatureMatrix,
    block: usize,
) -> Result<Vec<PredictionTrace>, TmvError> {
    let pa: Vec<Option<TaskId>> = learn::predict_matrix(model_a, matrix)?.into_iter().map(Some).collect();
    let pb: Vec<Option<TaskId>> = learn::predict_matrix(model_b, matrix)?.into_iter().map(Some).collect();
    traces_from_predictions(matrix, (&model_a.spec.name, &pa), (&model_b.spec.name, &pb), block)
}

/// Labels in `0..tasks` after applying `perm` (a permutation of the ids).
pub fn relabel(labels: &[TaskId], perm: &[TaskId]) -> Vec<TaskId> {
    labels.iter().map(|&l| perm[usize::from(l)]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ModelParams;
    use crate::exec::Sequential;
    use crate::learn::{train, Family};
    use alloc::vec;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const A: TaskId = 0;
    const B: TaskId = 1;

    /// Independent per-block tally using a fixed-size histogram.
    fn oracle(raw: &[TaskId], block: usize) -> Vec<TaskId> {
        let mut out = vec![0; raw.len()];
        let mut start = 0;
        while start < raw.len() {
            let end = (start + block).min(raw.len());
            let mut hist = [0usize; 16];
            for &l in &raw[start..end] {
                hist[usize::from(l)] += 1;
            }
            let best = *hist.iter().max().unwrap();
            let winner = hist.iter().position(|&c| c == best).unwrap() as TaskId;
            for o in &mut out[start..end] {
                *o = winner;
            }
            start = end;
        }
        out
    }

    fn pooled_oracle(a: &[TaskId], b: &[TaskId], block: usize) -> Vec<TaskId> {
        let mut out = vec![0; a.len()];
        let mut start = 0;
        while start < a.len() {
            let end = (start + block).min(a.len());
            let mut hist = [0usize; 16];
            for &l in a[start..end].iter().chain(&b[start..end]) {
                hist[usize::from(l)] += 1;
            }
            let best = *hist.iter().max().unwrap();
            let winner = hist.iter().position(|&c| c == best).unwrap() as TaskId;
            out[start..end].fill(winner);
            start = end;
        }
        out
    }

    #[test]
    fn examples() {
        assert_eq!(time_majority_vote(&[A, A, B, A, A], 5), vec![A; 5]);
        assert_eq!(time_majority_vote(&[B; 7], 3), vec![B; 7]);
        assert_eq!(time_majority_vote(&[B, A], 2), vec![A, A]);
        assert_eq!(time_majority_vote(&[B, B, A, A, B], 2), vec![B, B, A, A, B]);
        assert_eq!(time_majority_vote(&[], 4), Vec::<TaskId>::new());
    }

    #[test]
    fn random_streams_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let n = rng.random_range(0..120);
            let t = rng.random_range(1..6);
            let raw: Vec<TaskId> = (0..n).map(|_| rng.random_range(0..t)).collect();
            let block = rng.random_range(1..30);
            assert_eq!(time_majority_vote(&raw, block), oracle(&raw, block));
            let other: Vec<TaskId> = (0..n).map(|_| rng.random_range(0..t)).collect();
            assert_eq!(
                fuse_two(&raw, &other, block).unwrap(),
                pooled_oracle(&raw, &other, block)
            );
        }
    }

    #[test]
    fn fusion_examples() {
        let x = [A, B, A, A, B, B, A];
        assert_eq!(fuse_two(&x, &x, 3).unwrap(), time_majority_vote(&x, 3));
        // 60% A in each trace
        let a = [A, A, A, B, B];
        let b = [B, A, B, A, A];
        assert_eq!(fuse_two(&a, &b, 5).unwrap(), vec![A; 5]);
        assert_eq!(fuse_two(&a, &b[..4], 5), Err(TmvError::LengthMismatch { a: 5, b: 4 }));
    }

    proptest! {
        #[test]
        fn idempotent_and_length_preserving(raw in proptest::collection::vec(0u16..4, 0..200), block in 1usize..25) {
            let once = time_majority_vote(&raw, block);
            prop_assert_eq!(once.len(), raw.len());
            prop_assert_eq!(time_majority_vote(&once, block), once);
        }

        #[test]
        fn edits_stay_inside_their_block(raw in proptest::collection::vec(0u16..4, 1..200), block in 1usize..25, pos in any::<prop::sample::Index>(), v in 0u16..4) {
            let i = pos.index(raw.len());
            let mut edited = raw.clone();
            edited[i] = v;
            let a = time_majority_vote(&raw, block);
            let b = time_majority_vote(&edited, block);
            let lo = i / block * block;
            let hi = (lo + block).min(raw.len());
            for j in (0..raw.len()).filter(|j| *j < lo || *j >= hi) {
                prop_assert_eq!(a[j], b[j]);
            }
        }

        #[test]
        fn permutation_commutes_on_tie_free_streams(raw in proptest::collection::vec(0u16..3, 0..150), block in 1usize..20, perm_pick in 0usize..6) {
            let perms: [[TaskId; 3]; 6] = [[0,1,2],[0,2,1],[1,0,2],[1,2,0],[2,0,1],[2,1,0]];
            let perm = perms[perm_pick];
            let tie_free = raw.chunks(block).all(|c| {
                let mut h = [0usize; 3];
                for &l in c { h[usize::from(l)] += 1; }
                let m = *h.iter().max().unwrap();
                h.iter().filter(|&&x| x == m).count() == 1
            });
            prop_assume!(tie_free);
            prop_assert_eq!(
                time_majority_vote(&relabel(&raw, &perm), block),
                relabel(&time_majority_vote(&raw, block), &perm)
            );
        }
    }

    #[test]
    fn block_accuracy_counts_blocks() {
        let designed = [A, A, A, B, B, B];
        assert_eq!(block_accuracy(&designed, &[A, A, A, B, B, B], 3), 1.0);
        assert_eq!(block_accuracy(&designed, &[A, A, A, A, A, A], 3), 0.5);
        assert_eq!(block_accuracy(&[], &[], 3), 0.0);
    }

    fn session_matrix(sessions: &[(u32, usize)]) -> FeatureMatrix {
        let mut values = Vec::new();
        let mut labels = Vec::new();
        let mut starts = Vec::new();
        let mut sess = Vec::new();
        for &(s, n) in sessions {
            for i in 0..n {
                let label = (i / 4 % 2) as TaskId;
                values.push(f64::from(label) * 10.0 + i as f64 * 0.01);
                labels.push(label);
                starts.push(i as f64);
                sess.push(s);
            }
        }
        FeatureMatrix::new(1, values, labels, starts, sess).unwrap()
    }

    #[test]
    fn pipeline_emits_three_traces_per_session() {
        let m = session_matrix(&[(1, 16), (2, 16), (3, 16), (4, 16), (5, 16), (6, 16)]);
        let p = ModelParams::default();
        let a = train(&p.spec(Family::RandomForest), &m, 1, &Sequential).unwrap();
        let b = train(&p.spec(Family::SvmRbf), &m, 1, &Sequential).unwrap();
        let traces = tmv_pipeline(&a, &b, &m, 4).unwrap();
        assert_eq!(traces.len(), 18);
        let sources: Vec<&str> = traces[..3].iter().map(|t| t.source.as_str()).collect();
        assert_eq!(sources, ["random_forest", "svm_rbf", FUSED_SOURCE]);
        for t in &traces {
            assert_eq!(t.len(), 16);
            assert_eq!(t.smoothed, m.labels()[..16]);
        }
        assert_eq!(tmv_pipeline(&a, &b, &m, 4).unwrap(), traces);
    }

    #[test]
    fn single_window_session_is_identity() {
        let m = session_matrix(&[(1, 1)]);
        let preds = [Some(1)];
        let traces = traces_from_predictions(&m, ("a", &preds), ("b", &[Some(0)]), 20).unwrap();
        assert_eq!(traces.len(), 3);
        assert_eq!(traces[0].smoothed, vec![1]);
        assert_eq!(traces[1].smoothed, vec![0]);
        // pooled tie between 0 and 1
        assert_eq!(traces[2].smoothed, vec![0]);
        assert_eq!(
            traces_from_predictions(&m, ("a", &[None]), ("b", &[Some(0)]), 20),
            Err(TmvError::MissingPrediction { row: 0 })
        );
    }
}
