//! Band-power recording files and session manifests.
//!
//! A recording is a comma-separated file whose header names a `TimeStamp`
//! column, one `<Band>_<Electrode>` column per band and electrode, and
//! optionally `HeadBandOn` and `HSI_<Electrode>` quality columns. Other
//! columns are ignored. Each session is paired with a manifest file
//! `<stem>.manifest.csv` holding `task,start_seconds,end_seconds` rows.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use bci_core::types::TypeError;
use bci_core::types::DEFAULT_BANDS;
use bci_core::{Recording, Sample, Schema, Segment, SessionManifest, TaskSet};
use chrono::{DateTime, NaiveDateTime};
use thiserror::Error;

pub const TIMESTAMP_COLUMN: &str = "TimeStamp";
pub const CONTACT_PREFIX: &str = "HSI_";
pub const MANIFEST_SUFFIX: &str = ".manifest.csv";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("input is empty; expected a header line")]
    MissingHeader,
    #[error("header has no TimeStamp column")]
    MissingTimestamp,
    #[error("header has no <Band>_<Electrode> columns")]
    NoBandColumns,
    #[error("column {0:?} appears more than once")]
    DuplicateColumn(String),
    #[error("header lacks a column for band {band:?} at electrode {electrode:?}")]
    IncompleteGrid { band: String, electrode: String },
    #[error("contact-quality columns must cover every electrode exactly once: {0}")]
    QualityColumns(String),
    #[error("header lacks column {0:?} required by the schema")]
    MissingColumn(String),
    #[error(transparent)]
    Invalid(#[from] TypeError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    File { path: PathBuf, source: Box<IngestError> },
    #[error("{0}: no matching recording or manifest")]
    UnpairedFile(PathBuf),
    #[error("{path}: {source}")]
    ManifestOutOfRange { path: PathBuf, source: TypeError },
    #[error("{path}:{line}: {message}")]
    BadManifest { path: PathBuf, line: u64, message: String },
    #[error("{path}: task {name:?} is not in the configured task list")]
    UnknownTask { path: PathBuf, name: String },
    #[error("study mixes subjects {0:?} and {1:?}; put each subject in its own directory")]
    MixedSubjects(String, String),
    #[error("session {session} of subject {subject:?} has more than one recording file")]
    DuplicateSession { subject: String, session: u32 },
    #[error("{0}: no recording files found")]
    EmptyStudy(PathBuf),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IngestError + '_ {
    move |source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WarningKind {
    /// Row skipped: its cell count differs from the header's.
    RowArity { expected: usize, found: usize },
    /// Row skipped: the timestamp cell could not be read.
    BadTimestamp(String),
    /// A band-power cell was blank, not a number or not finite.
    NonNumeric { column: String },
    /// A quality cell could not be read and was left missing.
    BadQuality { column: String },
    /// Timestamp earlier than the previous row's; the row is kept in place.
    OutOfOrder,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseWarning {
    /// 1-based line in the input; the header is line 1.
    pub line: u64,
    pub kind: WarningKind,
}

impl fmt::Display for ParseWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: ", self.line)?;
        match &self.kind {
            WarningKind::RowArity { expected, found } => {
                write!(f, "expected {expected} cells, found {found}; row skipped")
            }
            WarningKind::BadTimestamp(t) => write!(f, "unreadable timestamp {t:?}; row skipped"),
            WarningKind::NonNumeric { column } => write!(f, "{column} is not a finite number"),
            WarningKind::BadQuality { column } => write!(f, "{column} is unreadable; treated as missing"),
            WarningKind::OutOfOrder => write!(f, "timestamp goes backwards; row kept in file order"),
        }
    }
}

/// How to find the schema of a recording file.
#[derive(Debug, Clone, PartialEq)]
pub enum SchemaSource {
    /// Read it from the header, with this sample rate.
    Infer {
        sample_rate_hz: f64,
    },
    Given(Schema),
}

fn is_timestamp(name: &str) -> bool {
    name.eq_ignore_ascii_case(TIMESTAMP_COLUMN)
}

fn is_headband(name: &str) -> bool {
    name.eq_ignore_ascii_case(bci_core::types::DEFAULT_HEADBAND_COLUMN)
}

fn contact_electrode(name: &str) -> Option<&str> {
    let (prefix, rest) = name.split_at_checked(CONTACT_PREFIX.len())?;
    (prefix.eq_ignore_ascii_case(CONTACT_PREFIX) && !rest.is_empty()).then_some(rest)
}

/// Splits `Alpha_TP9` into (`alpha`, `TP9`) when the band is a known one.
fn band_column(name: &str) -> Option<(&'static str, &str)> {
    let (band, electrode) = name.split_once('_')?;
    if electrode.is_empty() {
        return None;
    }
    DEFAULT_BANDS
        .iter()
        .find(|b| b.eq_ignore_ascii_case(band))
        .map(|b| (*b, electrode))
}

/// Header cell for a band-power column: `Delta_TP9`.
pub fn band_column_name(band: &str, electrode: &str) -> String {
    let mut chars = band.chars();
    let head: String = chars.next().map(|c| c.to_uppercase().collect()).unwrap_or_default();
    format!("{head}{}_{electrode}", chars.as_str())
}

fn split_header(line: &str) -> Vec<String> {
    line.split(',')
        .map(|c| c.trim().trim_start_matches('\u{feff}').to_string())
        .collect()
}

/// Reads a schema from a header line. Bands and electrodes are listed in
/// order of first appearance; every band must be present for every
/// electrode.
pub fn infer_schema(header_line: &str, sample_rate_hz: f64) -> Result<Schema, IngestError> {
    schema_from_cells(&split_header(header_line), sample_rate_hz)
}

fn schema_from_cells(cells: &[String], sample_rate_hz: f64) -> Result<Schema, IngestError> {
    check_duplicates(cells)?;
    if !cells.iter().any(|c| is_timestamp(c)) {
        return Err(IngestError::MissingTimestamp);
    }
    let mut bands: Vec<String> = Vec::new();
    let mut electrodes: Vec<String> = Vec::new();
    let mut pairs = Vec::new();
    for cell in cells {
        if let Some((band, electrode)) = band_column(cell) {
            if !bands.iter().any(|b| b == band) {
                bands.push(band.to_string());
            }
            if !electrodes.iter().any(|e| e.eq_ignore_ascii_case(electrode)) {
                electrodes.push(electrode.to_string());
            }
            pairs.push((band, electrode.to_ascii_lowercase()));
        }
    }
    if bands.is_empty() {
        return Err(IngestError::NoBandColumns);
    }
    for e in &electrodes {
        for b in &bands {
            if !pairs.iter().any(|(pb, pe)| pb == b && *pe == e.to_ascii_lowercase()) {
                return Err(IngestError::IncompleteGrid {
                    band: b.clone(),
                    electrode: e.clone(),
                });
            }
        }
    }
    let headband = cells.iter().find(|c| is_headband(c)).cloned();
    let contact_cells: Vec<&String> = cells.iter().filter(|c| contact_electrode(c).is_some()).collect();
    let mut contact = Vec::new();
    if !contact_cells.is_empty() {
        for e in &electrodes {
            match contact_cells
                .iter()
                .find(|c| contact_electrode(c).is_some_and(|x| x.eq_ignore_ascii_case(e)))
            {
                Some(c) => contact.push((*c).clone()),
                None => return Err(IngestError::QualityColumns(format!("no {CONTACT_PREFIX}{e}"))),
            }
        }
        if contact_cells.len() != electrodes.len() {
            return Err(IngestError::QualityColumns(format!(
                "{} columns for {} electrodes",
                contact_cells.len(),
                electrodes.len()
            )));
        }
    }
    Ok(Schema::new(electrodes, bands, sample_rate_hz)?.with_quality(headband, contact)?)
}

fn check_duplicates(cells: &[String]) -> Result<(), IngestError> {
    for (i, a) in cells.iter().enumerate() {
        if !a.is_empty() && cells[..i].iter().any(|b| b.eq_ignore_ascii_case(a)) {
            return Err(IngestError::DuplicateColumn(a.clone()));
        }
    }
    Ok(())
}

/// Column positions of each schema field within a header.
struct ColumnMap {
    width: usize,
    timestamp: usize,
    band: Vec<usize>,
    contact: Vec<usize>,
    headband: Option<usize>,
    names: Vec<String>,
}

impl ColumnMap {
    fn new(cells: &[String], schema: &Schema) -> Result<Self, IngestError> {
        let find = |name: &str| {
            cells
                .iter()
                .position(|c| c.eq_ignore_ascii_case(name))
                .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
        };
        let timestamp = cells
            .iter()
            .position(|c| is_timestamp(c))
            .ok_or(IngestError::MissingTimestamp)?;
        let mut band = Vec::with_capacity(schema.band_power_len());
        for e in schema.electrodes() {
            for b in schema.bands() {
                band.push(find(&band_column_name(b, e))?);
            }
        }
        let contact = schema
            .contact_columns()
            .iter()
            .map(|c| find(c))
            .collect::<Result<_, _>>()?;
        let headband = schema.headband_column().map(find).transpose()?;
        Ok(Self {
            width: cells.len(),
            timestamp,
            band,
            contact,
            headband,
            names: cells.to_vec(),
        })
    }
}

#[derive(Debug, Clone, Copy)]
enum Stamp {
    Seconds(f64),
    Nanos(i64),
}

fn parse_stamp(cell: &str) -> Option<Stamp> {
    if let Ok(v) = cell.parse::<f64>() {
        return v.is_finite().then_some(Stamp::Seconds(v));
    }
    if let Ok(t) = DateTime::parse_from_rfc3339(cell) {
        return t.timestamp_nanos_opt().map(Stamp::Nanos);
    }
    ["%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S%.f"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(cell, f).ok())
        .and_then(|t| t.and_utc().timestamp_nanos_opt())
        .map(Stamp::Nanos)
}

fn rebase(t: Stamp, origin: Stamp) -> Option<f64> {
    match (t, origin) {
        (Stamp::Seconds(t), Stamp::Seconds(o)) => Some(t - o),
        (Stamp::Nanos(t), Stamp::Nanos(o)) => Some(t.checked_sub(o)? as f64 / 1e9),
        _ => None,
    }
}

fn parse_headband(cell: &str) -> Result<Option<bool>, ()> {
    if cell.is_empty() {
        return Ok(None);
    }
    if cell.eq_ignore_ascii_case("true") {
        return Ok(Some(true));
    }
    if cell.eq_ignore_ascii_case("false") {
        return Ok(Some(false));
    }
    match cell.parse::<f64>() {
        Ok(1.0) => Ok(Some(true)),
        Ok(0.0) => Ok(Some(false)),
        _ => Err(()),
    }
}

/// Parses a recording. Timestamps (raw seconds or ISO-8601) are re-based so
/// the first data row sits at 0. Malformed rows and cells become warnings;
/// only a missing or unusable header is an error.
pub fn parse_recording(
    text: &[u8],
    schema: &SchemaSource,
    subject_id: &str,
    session_index: u32,
) -> Result<(Recording, Vec<ParseWarning>), IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text);
    let mut records = reader.byte_records();
    let header = loop {
        match records.next() {
            None => return Err(IngestError::MissingHeader),
            Some(Ok(r)) if r.iter().all(|c| c.is_empty()) => continue,
            Some(Ok(r)) => break r,
            Some(Err(_)) => return Err(IngestError::MissingHeader),
        }
    };
    let header: Vec<String> = header
        .iter()
        .map(|c| String::from_utf8_lossy(c).trim_start_matches('\u{feff}').to_string())
        .collect();
    let schema = match schema {
        SchemaSource::Infer { sample_rate_hz } => schema_from_cells(&header, *sample_rate_hz)?,
        SchemaSource::Given(s) => {
            check_duplicates(&header)?;
            s.clone()
        }
    };
    let cols = ColumnMap::new(&header, &schema)?;

    let mut warnings = Vec::new();
    let mut samples = Vec::new();
    let mut origin: Option<Stamp> = None;
    let mut previous = f64::NEG_INFINITY;
    for record in records {
        let Ok(record) = record else { continue };
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(|c| c.is_empty()) && record.len() <= 1 {
            continue;
        }
        if record.len() != cols.width {
            warnings.push(ParseWarning {
                line,
                kind: WarningKind::RowArity {
                    expected: cols.width,
                    found: record.len(),
                },
            });
            continue;
        }
        let cell = |i: usize| String::from_utf8_lossy(&record[i]).into_owned();
        let ts_cell = cell(cols.timestamp);
        let Some(stamp) = parse_stamp(&ts_cell) else {
            warnings.push(ParseWarning {
                line,
                kind: WarningKind::BadTimestamp(ts_cell),
            });
            continue;
        };
        let origin = *origin.get_or_insert(stamp);
        let Some(timestamp) = rebase(stamp, origin) else {
            warnings.push(ParseWarning {
                line,
                kind: WarningKind::BadTimestamp(ts_cell),
            });
            continue;
        };
        if timestamp < previous {
            warnings.push(ParseWarning {
                line,
                kind: WarningKind::OutOfOrder,
            });
        }
        previous = previous.max(timestamp);

        let band_power = cols
            .band
            .iter()
            .map(|&i| {
                let text = cell(i);
                let v = text.parse::<f64>().unwrap_or(f64::NAN);
                if !v.is_finite() {
                    warnings.push(ParseWarning {
                        line,
                        kind: WarningKind::NonNumeric {
                            column: cols.names[i].clone(),
                        },
                    });
                }
                v
            })
            .collect();
        let contact = cols
            .contact
            .iter()
            .map(|&i| {
                let text = cell(i);
                if text.is_empty() {
                    return f64::NAN;
                }
                text.parse::<f64>().unwrap_or_else(|_| {
                    warnings.push(ParseWarning {
                        line,
                        kind: WarningKind::BadQuality {
                            column: cols.names[i].clone(),
                        },
                    });
                    f64::NAN
                })
            })
            .collect();
        let headband_on = match cols.headband {
            None => None,
            Some(i) => parse_headband(&cell(i)).unwrap_or_else(|()| {
                warnings.push(ParseWarning {
                    line,
                    kind: WarningKind::BadQuality {
                        column: cols.names[i].clone(),
                    },
                });
                None
            }),
        };
        samples.push(Sample {
            timestamp,
            band_power,
            contact,
            headband_on,
        });
    }
    let recording = Recording::new(schema, subject_id.to_string(), session_index, samples)?;
    Ok((recording, warnings))
}

fn push_number(out: &mut String, v: f64) {
    if !v.is_nan() {
        out.push_str(&v.to_string());
    }
}

/// Writes a header from the schema and one row per sample. Numbers use the
/// shortest representation that reads back to the same value; NaN and
/// missing quality values become empty cells.
pub fn serialize_recording(recording: &Recording) -> Vec<u8> {
    let schema = recording.schema();
    let mut out = String::from(TIMESTAMP_COLUMN);
    for e in schema.electrodes() {
        for b in schema.bands() {
            out.push(',');
            out.push_str(&band_column_name(b, e));
        }
    }
    for c in schema.contact_columns() {
        out.push(',');
        out.push_str(c);
    }
    if let Some(h) = schema.headband_column() {
        out.push(',');
        out.push_str(h);
    }
    out.push('\n');
    for s in recording.samples() {
        push_number(&mut out, s.timestamp);
        for &v in s.band_power.iter().chain(&s.contact) {
            out.push(',');
            push_number(&mut out, v);
        }
        if schema.headband_column().is_some() {
            out.push(',');
            match s.headband_on {
                Some(true) => out.push('1'),
                Some(false) => out.push('0'),
                None => {}
            }
        }
        out.push('\n');
    }
    out.into_bytes()
}

/// Parses a manifest. Task names are resolved through `tasks`: unseen names
/// are appended unless `fixed` is set, in which case they are an error.
pub fn parse_manifest(
    text: &str,
    path: &Path,
    tasks: &mut TaskSet,
    fixed: bool,
) -> Result<SessionManifest, IngestError> {
    let bad = |line: u64, message: String| IngestError::BadManifest {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i as u64 + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let Some((hline, header)) = lines.next() else {
        return Err(bad(1, "empty manifest".into()));
    };
    let cells = split_header(header);
    let col = |name: &str| {
        cells
            .iter()
            .position(|c| c.eq_ignore_ascii_case(name))
            .ok_or_else(|| bad(hline, format!("missing column {name}")))
    };
    let (task_col, start_col, end_col) = (col("task")?, col("start_seconds")?, col("end_seconds")?);
    let mut segments = Vec::new();
    for (line, text) in lines {
        let row: Vec<&str> = text.split(',').map(str::trim).collect();
        if row.len() != cells.len() {
            return Err(bad(
                line,
                format!("expected {} cells, found {}", cells.len(), row.len()),
            ));
        }
        let number = |i: usize| {
            row[i]
                .parse::<f64>()
                .map_err(|_| bad(line, format!("{:?} is not a number", row[i])))
        };
        let name = row[task_col];
        let task = if fixed {
            tasks.id(name).ok_or_else(|| IngestError::UnknownTask {
                path: path.to_path_buf(),
                name: name.to_string(),
            })?
        } else {
            tasks.intern(name).map_err(|e| bad(line, e.to_string()))?
        };
        segments.push(Segment {
            task,
            start: number(start_col)?,
            end: number(end_col)?,
        });
    }
    SessionManifest::new(segments).map_err(|e| bad(hline, e.to_string()))
}

pub fn serialize_manifest(manifest: &SessionManifest, tasks: &TaskSet) -> String {
    let mut out = String::from("task,start_seconds,end_seconds\n");
    for s in manifest.segments() {
        let name = tasks.name(s.task).map_or_else(|| s.task.to_string(), str::to_string);
        out.push_str(&format!("{name},{},{}\n", s.start, s.end));
    }
    out
}

/// Splits `S01_session3` into (`S01`, 3).
pub fn parse_session_stem(stem: &str) -> Option<(&str, u32)> {
    let at = stem.rfind("_session")?;
    let subject = &stem[..at];
    let index: u32 = stem[at + "_session".len()..].parse().ok()?;
    (!subject.is_empty() && index >= 1).then_some((subject, index))
}

pub fn session_stem(subject: &str, session: u32) -> String {
    format!("{subject}_session{session}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub recording: Recording,
    pub manifest: SessionManifest,
    pub warnings: Vec<ParseWarning>,
}

/// Loads every `<subject>_session<k>.csv|txt` recording in `dir` with its
/// manifest, ordered by session index. Files matching neither pattern are
/// ignored.
pub fn load_session_set(
    dir: &Path,
    schema: &SchemaSource,
    tasks: &mut TaskSet,
    fixed_tasks: bool,
) -> Result<Vec<Session>, IngestError> {
    let mut recordings: BTreeMap<u32, (String, PathBuf)> = BTreeMap::new();
    let mut manifests: BTreeMap<String, PathBuf> = BTreeMap::new();
    let mut names: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .map(|e| e.map(|e| e.path()).map_err(io_err(dir)))
        .collect::<Result<_, _>>()?;
    names.sort();
    let mut subject: Option<String> = None;
    for path in names {
        if !path.is_file() {
            continue;
        }
        let Some(file) = path.file_name().and_then(|f| f.to_str()) else {
            continue;
        };
        if let Some(stem) = file.strip_suffix(MANIFEST_SUFFIX) {
            if parse_session_stem(stem).is_some() {
                manifests.insert(stem.to_string(), path.clone());
            }
            continue;
        }
        let Some((stem, ext)) = file.rsplit_once('.') else {
            continue;
        };
        if !(ext.eq_ignore_ascii_case("csv") || ext.eq_ignore_ascii_case("txt")) {
            continue;
        }
        let Some((subj, index)) = parse_session_stem(stem) else {
            log::debug!("ignoring {}", path.display());
            continue;
        };
        match &subject {
            Some(s) if s != subj => return Err(IngestError::MixedSubjects(s.clone(), subj.to_string())),
            _ => subject = Some(subj.to_string()),
        }
        if recordings.insert(index, (stem.to_string(), path.clone())).is_some() {
            return Err(IngestError::DuplicateSession {
                subject: subj.to_string(),
                session: index,
            });
        }
    }
    let subject = subject.ok_or_else(|| IngestError::EmptyStudy(dir.to_path_buf()))?;
    if let Some((_, path)) = manifests
        .iter()
        .find(|(stem, _)| !recordings.values().any(|(s, _)| s == *stem))
    {
        return Err(IngestError::UnpairedFile(path.clone()));
    }

    let mut out = Vec::with_capacity(recordings.len());
    for (index, (stem, path)) in recordings {
        let manifest_path = manifests
            .get(&stem)
            .ok_or_else(|| IngestError::UnpairedFile(path.clone()))?;
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        let (recording, warnings) =
            parse_recording(&bytes, schema, &subject, index).map_err(|e| IngestError::File {
                path: path.clone(),
                source: Box::new(e),
            })?;
        for w in &warnings {
            log::warn!("{}: {w}", path.display());
        }
        let text = fs::read_to_string(manifest_path).map_err(io_err(manifest_path))?;
        let manifest = parse_manifest(&text, manifest_path, tasks, fixed_tasks)?;
        manifest
            .check_range(recording.duration())
            .map_err(|source| IngestError::ManifestOutOfRange {
                path: manifest_path.clone(),
                source,
            })?;
        out.push(Session {
            recording,
            manifest,
            warnings,
        });
    }
    Ok(out)
}

/// Writes each session as `<subject>_session<k>.csv` plus its manifest.
pub fn write_session_set(
    dir: &Path,
    sessions: &[(Recording, SessionManifest)],
    tasks: &TaskSet,
) -> Result<(), IngestError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for (recording, manifest) in sessions {
        let stem = session_stem(recording.subject_id(), recording.session_index());
        let path = dir.join(format!("{stem}.csv"));
        fs::write(&path, serialize_recording(recording)).map_err(io_err(&path))?;
        let path = dir.join(format!("{stem}{MANIFEST_SUFFIX}"));
        fs::write(&path, serialize_manifest(manifest, tasks)).map_err(io_err(&path))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn infer() -> SchemaSource {
        SchemaSource::Infer { sample_rate_hz: 10.0 }
    }

    #[test]
    fn infers_bands_and_electrodes_in_header_order() {
        let s = infer_schema("TimeStamp,Delta_TP9,Delta_AF7", 10.0).unwrap();
        assert_eq!(s.bands(), ["delta"]);
        assert_eq!(s.electrodes(), ["TP9", "AF7"]);
        assert!(s.contact_columns().is_empty());
        assert_eq!(s.headband_column(), None);
    }

    #[test]
    fn header_errors() {
        assert!(matches!(
            infer_schema("TimeStamp", 10.0),
            Err(IngestError::NoBandColumns)
        ));
        assert!(matches!(
            infer_schema("Alpha_TP9", 10.0),
            Err(IngestError::MissingTimestamp)
        ));
        assert!(matches!(
            infer_schema("TimeStamp,Alpha_TP9,Alpha_TP9", 10.0),
            Err(IngestError::DuplicateColumn(c)) if c == "Alpha_TP9"
        ));
        assert!(matches!(
            infer_schema("TimeStamp,Alpha_TP9,Beta_AF7", 10.0),
            Err(IngestError::IncompleteGrid { .. })
        ));
    }

    #[test]
    fn quality_and_unknown_columns() {
        let s = infer_schema(
            "timestamp,RAW_TP9,alpha_TP9,Alpha_AF7,HSI_AF7,HSI_TP9,HeadBandOn,Elements",
            10.0,
        )
        .unwrap();
        assert_eq!(s.electrodes(), ["TP9", "AF7"]);
        assert_eq!(s.contact_columns(), ["HSI_TP9", "HSI_AF7"]);
        assert_eq!(s.headband_column(), Some("HeadBandOn"));
        assert!(matches!(
            infer_schema("TimeStamp,Alpha_TP9,Alpha_AF7,HSI_TP9", 10.0),
            Err(IngestError::QualityColumns(_))
        ));
    }

    #[test]
    fn minimal_parse() {
        let text = b"TimeStamp,Delta_TP9,Delta_AF7\n100.0,1.5,2\n100.1,-0.25,3\n";
        let (r, w) = parse_recording(text, &infer(), "1", 1).unwrap();
        assert!(w.is_empty());
        assert_eq!(r.len(), 2);
        assert_eq!(r.samples()[0].timestamp, 0.0);
        assert_eq!(r.samples()[1].band_power, vec![-0.25, 3.0]);
    }

    #[test]
    fn empty_input_has_no_header() {
        assert!(matches!(
            parse_recording(b"", &infer(), "1", 1),
            Err(IngestError::MissingHeader)
        ));
        assert!(matches!(
            parse_recording(b"\n\n", &infer(), "1", 1),
            Err(IngestError::MissingHeader)
        ));
    }

    #[test]
    fn blank_cell_is_kept_as_non_finite_with_a_warning() {
        let text = b"TimeStamp,Alpha_TP9,Beta_TP9\n0,,1\n";
        let (r, w) = parse_recording(text, &infer(), "1", 1).unwrap();
        assert_eq!(r.len(), 1);
        assert!(r.samples()[0].band_power[0].is_nan());
        assert_eq!(
            w,
            vec![ParseWarning {
                line: 2,
                kind: WarningKind::NonNumeric {
                    column: "Alpha_TP9".into()
                }
            }]
        );
    }

    #[test]
    fn arity_and_timestamp_problems_skip_rows() {
        let text = b"TimeStamp,Alpha_TP9\n0,1\n0.1,2,3\nsoon,4\n0.3,5\n0.2,6\n";
        let (r, w) = parse_recording(text, &infer(), "1", 1).unwrap();
        let kept: Vec<f64> = r.samples().iter().map(|s| s.band_power[0]).collect();
        assert_eq!(kept, vec![1.0, 5.0, 6.0]);
        let kinds: Vec<(u64, &WarningKind)> = w.iter().map(|w| (w.line, &w.kind)).collect();
        assert_eq!(kinds.len(), 3);
        assert!(matches!(kinds[0], (3, WarningKind::RowArity { expected: 2, found: 3 })));
        assert!(matches!(kinds[1], (4, WarningKind::BadTimestamp(_))));
        assert!(matches!(kinds[2], (6, WarningKind::OutOfOrder)));
    }

    #[test]
    fn iso_timestamps_are_rebased() {
        let text =
            b"TimeStamp,Alpha_TP9\n2021-03-04 10:00:00.000,1\n2021-03-04 10:00:00.250,2\n2021-03-04T10:00:01.5Z,3\n";
        let (r, w) = parse_recording(text, &infer(), "1", 1).unwrap();
        assert!(w.is_empty(), "{w:?}");
        let ts: Vec<f64> = r.samples().iter().map(|s| s.timestamp).collect();
        assert_eq!(ts, vec![0.0, 0.25, 1.5]);
    }

    #[test]
    fn quality_cells() {
        let text = b"TimeStamp,Alpha_TP9,HSI_TP9,HeadBandOn\n0,1,1,1\n0.1,1,,0\n0.2,1,x,maybe\n0.3,1,4,\n";
        let (r, w) = parse_recording(text, &infer(), "1", 1).unwrap();
        let hb: Vec<Option<bool>> = r.samples().iter().map(|s| s.headband_on).collect();
        assert_eq!(hb, vec![Some(true), Some(false), None, None]);
        assert!(r.samples()[1].contact[0].is_nan());
        assert_eq!(r.samples()[3].contact[0], 4.0);
        assert_eq!(w.len(), 2);
    }

    #[test]
    fn given_schema_must_be_present_in_header() {
        let s = Schema::new(vec!["TP9".into()], vec!["alpha".into(), "beta".into()], 10.0).unwrap();
        let text = b"TimeStamp,Alpha_TP9\n0,1\n";
        assert!(matches!(
            parse_recording(text, &SchemaSource::Given(s), "1", 1),
            Err(IngestError::MissingColumn(c)) if c == "Beta_TP9"
        ));
    }

    #[test]
    fn empty_recording_serializes_to_header_only() {
        let r = Recording::new(Schema::default(), "1".to_string(), 1, Vec::new()).unwrap();
        let text = String::from_utf8(serialize_recording(&r)).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.starts_with("TimeStamp,Delta_TP9,Theta_TP9"));
        let (back, w) = parse_recording(text.as_bytes(), &SchemaSource::Given(Schema::default()), "1", 1).unwrap();
        assert!(w.is_empty());
        assert_eq!(back, r);
    }

    #[test]
    fn manifest_parsing() {
        let mut tasks = TaskSet::default();
        let m = parse_manifest(
            "task,start_seconds,end_seconds\nrest,0,4\nmath,4,8.5\n",
            Path::new("m"),
            &mut tasks,
            false,
        )
        .unwrap();
        assert_eq!(tasks.names(), ["rest", "math"]);
        assert_eq!(m.segments()[1].end, 8.5);
        assert!(matches!(
            parse_manifest(
                "task,start_seconds,end_seconds\nsing,0,1\n",
                Path::new("m"),
                &mut tasks,
                true
            ),
            Err(IngestError::UnknownTask { .. })
        ));
        assert!(matches!(
            parse_manifest("task,start\nrest,0\n", Path::new("m"), &mut tasks, false),
            Err(IngestError::BadManifest { .. })
        ));
        assert!(matches!(
            parse_manifest(
                "task,start_seconds,end_seconds\nrest,3,1\n",
                Path::new("m"),
                &mut tasks,
                false
            ),
            Err(IngestError::BadManifest { .. })
        ));
    }

    #[test]
    fn session_stems() {
        assert_eq!(parse_session_stem("S01_session3"), Some(("S01", 3)));
        assert_eq!(parse_session_stem("a_b_session12"), Some(("a_b", 12)));
        assert_eq!(parse_session_stem("S01_session0"), None);
        assert_eq!(parse_session_stem("_session1"), None);
        assert_eq!(parse_session_stem("S01_session1.clean"), None);
    }
}
