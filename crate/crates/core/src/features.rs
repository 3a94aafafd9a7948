//! Windowed band-power features.

use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;

use crate::types::{Recording, SessionManifest, TaskId};

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureError {
    Shape { expected: usize, found: usize },
    NonFinite { row: usize },
    ZeroDim,
    DimMismatch { expected: usize, found: usize },
}

impl fmt::Display for FeatureError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureError::Shape { expected, found } => {
                write!(f, "expected {expected} values, found {found}")
            }
            FeatureError::NonFinite { row } => write!(f, "feature row {row} is not finite"),
            FeatureError::ZeroDim => write!(f, "feature dimension must be positive"),
            FeatureError::DimMismatch { expected, found } => {
                write!(f, "feature dimension mismatch: expected {expected}, found {found}")
            }
        }
    }
}

impl core::error::Error for FeatureError {}

/// Labeled per-window feature vectors, row-major `N × D`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    dim: usize,
    values: Vec<f64>,
    labels: Vec<TaskId>,
    window_start: Vec<f64>,
    sessions: Vec<u32>,
}

impl FeatureMatrix {
    pub fn new(
        dim: usize,
        values: Vec<f64>,
        labels: Vec<TaskId>,
        window_start: Vec<f64>,
        sessions: Vec<u32>,
    ) -> Result<Self, FeatureError> {
        if dim == 0 {
            return Err(FeatureError::ZeroDim);
        }
        let n = labels.len();
        for len in [window_start.len(), sessions.len()] {
            if len != n {
                return Err(FeatureError::Shape {
                    expected: n,
                    found: len,
                });
            }
        }
        if values.len() != n * dim {
            return Err(FeatureError::Shape {
                expected: n * dim,
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite { row: i / dim });
        }
        Ok(Self {
            dim,
            values,
            labels,
            window_start,
            sessions,
        })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            values: Vec::new(),
            labels: Vec::new(),
            window_start: Vec::new(),
            sessions: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn labels(&self) -> &[TaskId] {
        &self.labels
    }

    pub fn window_start(&self) -> &[f64] {
        &self.window_start
    }

    pub fn sessions(&self) -> &[u32] {
        &self.sessions
    }

    /// Distinct session indices, ascending.
    pub fn session_ids(&self) -> Vec<u32> {
        let mut ids = self.sessions.clone();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Row indices of one session, in matrix order.
    pub fn rows_of_session(&self, session: u32) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.sessions[i] == session).collect()
    }

    /// New matrix holding `rows` in the given order.
    pub fn select(&self, rows: &[usize]) -> Self {
        let mut values = Vec::with_capacity(rows.len() * self.dim);
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        Self {
            dim: self.dim,
            values,
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            window_start: rows.iter().map(|&r| self.window_start[r]).collect(),
            sessions: rows.iter().map(|&r| self.sessions[r]).collect(),
        }
    }

    /// Appends `other` below `self`.
    pub fn append(&mut self, other: &FeatureMatrix) -> Result<(), FeatureError> {
        if other.dim != self.dim {
            return Err(FeatureError::DimMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        self.values.extend_from_slice(&other.values);
        self.labels.extend_from_slice(&other.labels);
        self.window_start.extend_from_slice(&other.window_start);
        self.sessions.extend_from_slice(&other.sessions);
        Ok(())
    }

    /// Same rows and metadata with replaced values.
    fn with_values(&self, values: Vec<f64>) -> Self {
        Self { values, ..self.clone() }
    }

    /// Largest label id plus one (0 when empty).
    pub fn label_count(&self) -> usize {
        self.labels.iter().map(|&l| usize::from(l) + 1).max().unwrap_or(0)
    }
}

/// Row spans of `window_rows` consecutive samples with stride
/// `window_rows - overlap_rows`; a trailing partial window is discarded.
///
/// Panics if `window_rows == 0` or `overlap_rows >= window_rows`.
pub fn window(rows: usize, window_rows: usize, overlap_rows: usize) -> Vec<Range<usize>> {
    assert!(
        window_rows >= 1 && overlap_rows < window_rows,
        "invalid window geometry"
    );
    let stride = window_rows - overlap_rows;
    (0..)
        .map(|k| k * stride)
        .take_while(|start| start + window_rows <= rows)
        .map(|start| start..start + window_rows)
        .collect()
}

/// Why windows were left out of a feature matrix.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExtractTally {
    pub kept: usize,
    /// Window midpoint fell outside every manifest segment.
    pub unlabeled: usize,
    /// Window contained a non-finite band power.
    pub non_finite: usize,
}

/// Feature dimension for a schema with `band_power_len` columns.
pub fn feature_dim(band_power_len: usize, with_std: bool) -> usize {
    if with_std {
        2 * band_power_len
    } else {
        band_power_len
    }
}

/// Per-window column means (then standard deviations when `with_std`),
/// labeled by the manifest segment containing the window midpoint time.
pub fn extract_features(
    recording: &Recording,
    spans: &[Range<usize>],
    manifest: &SessionManifest,
    with_std: bool,
) -> (FeatureMatrix, ExtractTally) {
    let width = recording.schema().band_power_len();
    let dim = feature_dim(width, with_std);
    let samples = recording.samples();
    let mut out = FeatureMatrix::empty(dim);
    let mut tally = ExtractTally::default();
    let mut mean = alloc::vec![0.0; width];
    let mut m2 = alloc::vec![0.0; width];

    for span in spans {
        let rows = &samples[span.clone()];
        if rows.iter().any(|s| !s.is_finite()) {
            tally.non_finite += 1;
            continue;
        }
        let first = rows[0].timestamp;
        let last = rows[rows.len() - 1].timestamp;
        let Some(label) = manifest.task_at(0.5 * (first + last)) else {
            tally.unlabeled += 1;
            continue;
        };

        // Welford accumulation per column.
        mean.fill(0.0);
        m2.fill(0.0);
        for (k, s) in rows.iter().enumerate() {
            let count = (k + 1) as f64;
            for c in 0..width {
                let x = s.band_power[c];
                let delta = x - mean[c];
                mean[c] += delta / count;
                m2[c] += delta * (x - mean[c]);
            }
        }
        out.values.extend_from_slice(&mean);
        if with_std {
            let n = rows.len() as f64;
            out.values.extend(m2.iter().map(|v| libm::sqrt(v.max(0.0) / n)));
        }
        out.labels.push(label);
        out.window_start.push(first);
        out.sessions.push(recording.session_index());
        tally.kept += 1;
    }
    (out, tally)
}

/// Per-dimension z-score transform fitted on training rows.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Population standard deviation, or 1 for zero-variance dimensions.
    pub scale: Vec<f64>,
}

const ZERO_VARIANCE: f64 = 1e-12;

impl Standardizer {
    /// Fits on every row of `train`. An empty matrix yields the identity.
    pub fn fit(train: &FeatureMatrix) -> Self {
        let d = train.dim();
        let mut mean = alloc::vec![0.0; d];
        let mut m2 = alloc::vec![0.0; d];
        for i in 0..train.len() {
            let count = (i + 1) as f64;
            for (c, &x) in train.row(i).iter().enumerate() {
                let delta = x - mean[c];
                mean[c] += delta / count;
                m2[c] += delta * (x - mean[c]);
            }
        }
        let n = train.len().max(1) as f64;
        let scale = m2
            .iter()
            .map(|v| {
                let sd = libm::sqrt(v.max(0.0) / n);
                if sd > ZERO_VARIANCE {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform_row(&self, row: &mut [f64]) {
        for ((x, m), s) in row.iter_mut().zip(&self.mean).zip(&self.scale) {
            *x = (*x - m) / s;
        }
    }

    /// Flat row-major values, transformed.
    pub fn transform_values(&self, values: &[f64]) -> Vec<f64> {
        let mut out = values.to_vec();
        for row in out.chunks_mut(self.dim()) {
            self.transform_row(row);
        }
        out
    }

    pub fn transform(&self, m: &FeatureMatrix) -> Result<FeatureMatrix, FeatureError> {
        if m.dim() != self.dim() {
            return Err(FeatureError::DimMismatch {
                expected: self.dim(),
                found: m.dim(),
            });
        }
        Ok(m.with_values(self.transform_values(m.values())))
    }
}

/// Z-scores `train` and every matrix in `others` with statistics of `train`
/// only.
pub fn normalize(
    train: &FeatureMatrix,
    others: &[FeatureMatrix],
) -> Result<(FeatureMatrix, Vec<FeatureMatrix>, Standardizer), FeatureError> {
    let st = Standardizer::fit(train);
    let t = st.transform(train)?;
    let o = others.iter().map(|m| st.transform(m)).collect::<Result<_, _>>()?;
    Ok((t, o, st))
}
