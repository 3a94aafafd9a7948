//! Recordings, schemas, task vocabularies and session manifests.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

/// Dense task label id, `0..T` for a study with `T` tasks.
pub type TaskId = u16;

pub const DEFAULT_ELECTRODES: [&str; 4] = ["TP9", "AF7", "AF8", "TP10"];
pub const DEFAULT_BANDS: [&str; 5] = ["delta", "theta", "alpha", "beta", "gamma"];
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 10.0;
pub const DEFAULT_HEADBAND_COLUMN: &str = "HeadBandOn";

#[derive(Debug, Clone, PartialEq)]
pub enum TypeError {
    NoElectrodes,
    NoBands,
    BadSampleRate(f64),
    DuplicateName(String),
    ContactColumnCount { expected: usize, found: usize },
    SessionIndexZero,
    SampleShape { index: usize },
    EmptyTaskName,
    BadSegment { index: usize },
    SegmentOverlap { index: usize },
    ManifestOutOfRange { index: usize, end: f64, duration: f64 },
}

impl fmt::Display for TypeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeError::NoElectrodes => write!(f, "schema has no electrodes"),
            TypeError::NoBands => write!(f, "schema has no bands"),
            TypeError::BadSampleRate(r) => write!(f, "sample rate must be positive, got {r}"),
            TypeError::DuplicateName(n) => write!(f, "duplicate name {n:?}"),
            TypeError::ContactColumnCount { expected, found } => write!(
                f,
                "expected {expected} contact-quality columns (one per electrode), found {found}"
            ),
            TypeError::SessionIndexZero => write!(f, "session index must be at least 1"),
            TypeError::SampleShape { index } => {
                write!(f, "sample {index} does not match the schema shape")
            }
            TypeError::EmptyTaskName => write!(f, "task names must be non-empty"),
            TypeError::BadSegment { index } => {
                write!(f, "segment {index} must satisfy 0 <= start < end")
            }
            TypeError::SegmentOverlap { index } => {
                write!(f, "segment {index} overlaps or precedes the previous segment")
            }
            TypeError::ManifestOutOfRange { index, end, duration } => write!(
                f,
                "segment {index} ends at {end}s, after the recording duration of {duration}s"
            ),
        }
    }
}

impl core::error::Error for TypeError {}

fn check_unique(names: &[String]) -> Result<(), TypeError> {
    for (i, a) in names.iter().enumerate() {
        if names[..i].iter().any(|b| b.eq_ignore_ascii_case(a)) {
            return Err(TypeError::DuplicateName(a.clone()));
        }
    }
    Ok(())
}

/// Column layout of a band-power recording.
///
/// Band powers are stored electrode-major: the value for electrode `e` and
/// band `b` lives at `e * bands.len() + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    electrodes: Vec<String>,
    bands: Vec<String>,
    sample_rate_hz: f64,
    headband_column: Option<String>,
    contact_columns: Vec<String>,
}

impl Schema {
    pub fn new(electrodes: Vec<String>, bands: Vec<String>, sample_rate_hz: f64) -> Result<Self, TypeError> {
        if electrodes.is_empty() {
            return Err(TypeError::NoElectrodes);
        }
        if bands.is_empty() {
            return Err(TypeError::NoBands);
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(TypeError::BadSampleRate(sample_rate_hz));
        }
        check_unique(&electrodes)?;
        check_unique(&bands)?;
        Ok(Self {
            electrodes,
            bands,
            sample_rate_hz,
            headband_column: None,
            contact_columns: Vec::new(),
        })
    }

    /// Adds the optional quality columns. `contact_columns` must be empty or
    /// hold exactly one name per electrode.
    pub fn with_quality(
        mut self,
        headband_column: Option<String>,
        contact_columns: Vec<String>,
    ) -> Result<Self, TypeError> {
        if !contact_columns.is_empty() && contact_columns.len() != self.electrodes.len() {
            return Err(TypeError::ContactColumnCount {
                expected: self.electrodes.len(),
                found: contact_columns.len(),
            });
        }
        check_unique(&contact_columns)?;
        self.headband_column = headband_column;
        self.contact_columns = contact_columns;
        Ok(self)
    }

    pub fn with_sample_rate(mut self, sample_rate_hz: f64) -> Result<Self, TypeError> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(TypeError::BadSampleRate(sample_rate_hz));
        }
        self.sample_rate_hz = sample_rate_hz;
        Ok(self)
    }

    pub fn electrodes(&self) -> &[String] {
        &self.electrodes
    }

    pub fn bands(&self) -> &[String] {
        &self.bands
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn headband_column(&self) -> Option<&str> {
        self.headband_column.as_deref()
    }

    pub fn contact_columns(&self) -> &[String] {
        &self.contact_columns
    }

    /// Number of band-power values per sample.
    pub fn band_power_len(&self) -> usize {
        self.electrodes.len() * self.bands.len()
    }

    pub fn band_index(&self, electrode: usize, band: usize) -> usize {
        electrode * self.bands.len() + band
    }

    /// Total column count including the timestamp column.
    pub fn column_count(&self) -> usize {
        1 + self.band_power_len() + self.contact_columns.len() + usize::from(self.headband_column.is_some())
    }
}

impl Default for Schema {
    /// Four-electrode, five-band consumer headset layout at 10 rows per
    /// second, with `HeadBandOn` and `HSI_<electrode>` quality columns.
    fn default() -> Self {
        let electrodes: Vec<String> = DEFAULT_ELECTRODES.iter().map(|s| s.to_string()).collect();
        let contact = electrodes.iter().map(|e| alloc::format!("HSI_{e}")).collect();
        Schema {
            electrodes,
            bands: DEFAULT_BANDS.iter().map(|s| s.to_string()).collect(),
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            headband_column: Some(DEFAULT_HEADBAND_COLUMN.to_string()),
            contact_columns: contact,
        }
    }
}

/// One row of a band-power stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Seconds since session start.
    pub timestamp: f64,
    /// Electrode-major absolute band powers; non-finite marks a missing cell.
    pub band_power: Vec<f64>,
    /// Per-electrode contact-quality codes (NaN when the cell was empty).
    pub contact: Vec<f64>,
    pub headband_on: Option<bool>,
}

impl Sample {
    pub fn is_finite(&self) -> bool {
        self.band_power.iter().all(|v| v.is_finite())
    }
}

/// One session of one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    schema: Schema,
    subject_id: String,
    session_index: u32,
    samples: Vec<Sample>,
}

impl Recording {
    pub fn new(
        schema: Schema,
        subject_id: impl Into<String>,
        session_index: u32,
        samples: Vec<Sample>,
    ) -> Result<Self, TypeError> {
        if session_index == 0 {
            return Err(TypeError::SessionIndexZero);
        }
        let width = schema.band_power_len();
        let contacts = schema.contact_columns().len();
        for (index, s) in samples.iter().enumerate() {
            let contact_ok = s.contact.len() == contacts;
            if s.band_power.len() != width || !contact_ok || !s.timestamp.is_finite() {
                return Err(TypeError::SampleShape { index });
            }
        }
        Ok(Self {
            schema,
            subject_id: subject_id.into(),
            session_index,
            samples,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn session_index(&self) -> u32 {
        self.session_index
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn into_samples(self) -> Vec<Sample> {
        self.samples
    }

    /// Same metadata, different rows.
    pub fn with_samples(&self, samples: Vec<Sample>) -> Self {
        Self {
            schema: self.schema.clone(),
            subject_id: self.subject_id.clone(),
            session_index: self.session_index,
            samples,
        }
    }

    /// Whether timestamps never decrease. Parsers keep out-of-order rows in
    /// file order, so this can be false for real exports.
    pub fn is_time_ordered(&self) -> bool {
        self.samples.windows(2).all(|w| w[0].timestamp <= w[1].timestamp)
    }

    /// Time span covered by the rows: the last timestamp plus one sample
    /// period (each row covers `[t, t + 1/rate)`). Zero when empty.
    pub fn duration(&self) -> f64 {
        let last = self
            .samples
            .iter()
            .map(|s| s.timestamp)
            .fold(f64::NEG_INFINITY, f64::max);
        if last.is_finite() {
            last + 1.0 / self.schema.sample_rate_hz
        } else {
            0.0
        }
    }
}

/// Ordered, unique task names; a name's position is its [`TaskId`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TaskSet {
    names: Vec<String>,
}

impl TaskSet {
    pub fn new(names: Vec<String>) -> Result<Self, TypeError> {
        if names.iter().any(|n| n.is_empty()) {
            return Err(TypeError::EmptyTaskName);
        }
        for (i, a) in names.iter().enumerate() {
            if names[..i].contains(a) {
                return Err(TypeError::DuplicateName(a.clone()));
            }
        }
        Ok(Self { names })
    }

    /// `task1..taskT`.
    pub fn numbered(count: usize) -> Self {
        Self {
            names: (1..=count).map(|i| alloc::format!("task{i}")).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, id: TaskId) -> Option<&str> {
        self.names.get(usize::from(id)).map(String::as_str)
    }

    pub fn id(&self, name: &str) -> Option<TaskId> {
        self.names.iter().position(|n| n == name).map(|i| i as TaskId)
    }

    /// Returns the id for `name`, appending it if unseen.
    pub fn intern(&mut self, name: &str) -> Result<TaskId, TypeError> {
        if name.is_empty() {
            return Err(TypeError::EmptyTaskName);
        }
        Ok(match self.id(name) {
            Some(id) => id,
            None => {
                self.names.push(name.to_string());
                (self.names.len() - 1) as TaskId
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub task: TaskId,
    pub start: f64,
    pub end: f64,
}

/// Designed-task timeline of one session: `[start, end)` spans in seconds.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SessionManifest {
    segments: Vec<Segment>,
}

impl SessionManifest {
    pub fn new(segments: Vec<Segment>) -> Result<Self, TypeError> {
        for (index, s) in segments.iter().enumerate() {
            if !(s.start.is_finite() && s.end.is_finite() && s.start >= 0.0 && s.start < s.end) {
                return Err(TypeError::BadSegment { index });
            }
            if index > 0 && segments[index - 1].end > s.start {
                return Err(TypeError::SegmentOverlap { index });
            }
        }
        Ok(Self { segments })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Fails if any segment ends after `duration` seconds.
    pub fn check_range(&self, duration: f64) -> Result<(), TypeError> {
        // timestamps are sums of sample periods; allow rounding slack
        let limit = duration + 1e-9 * duration.abs().max(1.0);
        match self.segments.iter().position(|s| s.end > limit) {
            Some(index) => Err(TypeError::ManifestOutOfRange {
                index,
                end: self.segments[index].end,
                duration,
            }),
            None => Ok(()),
        }
    }

    /// Task whose segment contains `t` (start inclusive, end exclusive).
    pub fn task_at(&self, t: f64) -> Option<TaskId> {
        // segments are sorted and disjoint
        let i = self.segments.partition_point(|s| s.end <= t);
        self.segments
            .get(i)
            .filter(|s| s.start <= t && t < s.end)
            .map(|s| s.task)
    }

    /// Drops segments starting at or after `duration` and shortens the one
    /// straddling it.
    pub fn clip_to(&self, duration: f64) -> Self {
        let segments = self
            .segments
            .iter()
            .filter(|s| s.start < duration)
            .map(|s| Segment {
                end: s.end.min(duration),
                ..*s
            })
            .collect();
        Self { segments }
    }
}
