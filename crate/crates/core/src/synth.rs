//! Seeded synthetic studies with known ground truth.
//!
//! Every session walks through tasks `0..T` in order, one fixed-length
//! segment each. Band powers are Gaussian around a per-column base level;
//! task `t` raises every column `c` with `c mod T == t` by `delta`.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::seed::rng_for;
use crate::types::{Recording, Sample, Schema, Segment, SessionManifest, TaskId};

#[derive(Debug, Clone, PartialEq)]
pub struct StudyParams {
    pub tasks: usize,
    pub sessions: usize,
    pub segment_seconds: f64,
    pub schema: Schema,
    /// Mean shift of a task's own columns, in band-power units.
    pub delta: f64,
    /// Standard deviation of the per-row Gaussian noise.
    pub noise: f64,
    pub seed: u64,
    pub subject_id: String,
}

impl Default for StudyParams {
    /// Four tasks, six sessions of 40 s segments, `delta = 10 × noise`.
    fn default() -> Self {
        Self {
            tasks: 4,
            sessions: 6,
            segment_seconds: 40.0,
            schema: Schema::default(),
            delta: 1.0,
            noise: 0.1,
            seed: 0,
            subject_id: String::from("1"),
        }
    }
}

/// Panics if `tasks < 2`, `sessions == 0`, `delta < 0`, `noise < 0` or the
/// segment is shorter than one sample.
pub fn generate_study(p: &StudyParams) -> Vec<(Recording, SessionManifest)> {
    assert!(p.tasks >= 2, "need at least two tasks");
    assert!(p.sessions >= 1, "need at least one session");
    assert!(p.delta >= 0.0 && p.noise >= 0.0, "delta and noise must be non-negative");
    let rate = p.schema.sample_rate_hz();
    let seg_rows = libm::round(p.segment_seconds * rate) as usize;
    assert!(seg_rows >= 1, "segment shorter than one sample");
    let width = p.schema.band_power_len();
    let contacts = p.schema.contact_columns().len();
    let headband = p.schema.headband_column().map(|_| true);

    let mut base_rng = rng_for(p.seed, "synth-base", 0);
    let base: Vec<f64> = (0..width).map(|_| base_rng.random_range(0.5..1.5)).collect();
    let noise = Normal::new(0.0, p.noise).expect("finite noise level");

    (1..=p.sessions)
        .map(|session| {
            let mut rng = rng_for(p.seed, "synth-session", session as u64);
            let mut samples = Vec::with_capacity(p.tasks * seg_rows);
            let mut segments = Vec::with_capacity(p.tasks);
            for task in 0..p.tasks {
                let first = task * seg_rows;
                segments.push(Segment {
                    task: task as TaskId,
                    start: first as f64 / rate,
                    end: (first + seg_rows) as f64 / rate,
                });
                for i in first..first + seg_rows {
                    let band_power = (0..width)
                        .map(|c| {
                            let shift = if c % p.tasks == task { p.delta } else { 0.0 };
                            base[c] + shift + noise.sample(&mut rng)
                        })
                        .collect();
                    samples.push(Sample {
                        timestamp: i as f64 / rate,
                        band_power,
                        contact: alloc::vec![1.0; contacts],
                        headband_on: headband,
                    });
                }
            }
            let recording = Recording::new(p.schema.clone(), p.subject_id.clone(), session as u32, samples)
                .expect("generated samples match the schema");
            let manifest = SessionManifest::new(segments).expect("segments are ordered");
            (recording, manifest)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArtifactKind {
    /// A run of `FLATLINE_LEN` identical values in one column.
    Flatline,
    /// One column pushed to `±(OUT_OF_RANGE_LEVEL + u)`, `u ∈ [0, 1)`.
    OutOfRange,
    /// One column set to NaN.
    Dropout,
}

pub const FLATLINE_LEN: usize = 25;
pub const OUT_OF_RANGE_LEVEL: f64 = 9.0;

/// Corrupts about `rate × N` rows per requested kind at seeded positions.
/// Kinds never share rows, and flatline runs keep at least one untouched row
/// between them. Returns the corrupted recording and the injected rows,
/// sorted by row.
///
/// Panics unless `0 ≤ rate ≤ 1`.
pub fn inject_artifacts(
    recording: &Recording,
    kinds: &[ArtifactKind],
    rate: f64,
    seed: u64,
) -> (Recording, Vec<(usize, ArtifactKind)>) {
    assert!((0.0..=1.0).contains(&rate), "rate must lie in [0, 1]");
    let mut samples = recording.samples().to_vec();
    let n = samples.len();
    let width = recording.schema().band_power_len();
    let mut used = alloc::vec![false; n];
    let mut truth = Vec::new();
    let budget = libm::round(rate * n as f64) as usize;

    for (k, &kind) in kinds.iter().enumerate() {
        if budget == 0 {
            break;
        }
        let mut rng = rng_for(seed, "artifacts", k as u64);
        match kind {
            ArtifactKind::Flatline => {
                let runs = budget.div_ceil(FLATLINE_LEN);
                let stride = FLATLINE_LEN + 1;
                let mut slots: Vec<usize> = (0..n / stride).collect();
                slots.shuffle(&mut rng);
                let mut placed = 0;
                for slot in slots {
                    if placed == runs {
                        break;
                    }
                    let rows = slot * stride..slot * stride + FLATLINE_LEN;
                    if rows.clone().any(|r| used[r]) {
                        continue;
                    }
                    let col = rng.random_range(0..width);
                    let value = samples[rows.start].band_power[col];
                    for r in rows {
                        samples[r].band_power[col] = value;
                        used[r] = true;
                        truth.push((r, kind));
                    }
                    placed += 1;
                }
            }
            ArtifactKind::OutOfRange | ArtifactKind::Dropout => {
                let mut free: Vec<usize> = (0..n).filter(|&r| !used[r]).collect();
                free.shuffle(&mut rng);
                for &r in free.iter().take(budget) {
                    let col = rng.random_range(0..width);
                    samples[r].band_power[col] = if kind == ArtifactKind::Dropout {
                        f64::NAN
                    } else {
                        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                        sign * (OUT_OF_RANGE_LEVEL + rng.random_range(0.0..1.0))
                    };
                    used[r] = true;
                    truth.push((r, kind));
                }
            }
        }
    }
    truth.sort_by_key(|(r, _)| *r);
    (recording.with_samples(samples), truth)
}
