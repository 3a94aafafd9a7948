//! Intermediate files passed between pipeline stages.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use bci_core::clean::Rule;
use bci_core::eval::ModelScore;
use bci_core::{CleanReport, FeatureMatrix, PredictionTrace, Standardizer, TaskId, TaskSet, TrainedModel};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FEATURES_FILE: &str = "features.csv";
pub const STUDY_FILE: &str = "study.json";
pub const SCORES_CSV: &str = "scores.csv";
pub const SCORES_JSON: &str = "scores.json";
pub const TRACES_FILE: &str = "traces.csv";
pub const MODEL_FORMAT: &str = "bci-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{file}:{line}: {message}")]
    Syntax { file: String, line: usize, message: String },
    #[error("{file}: {message}")]
    Json { file: String, message: String },
}

pub fn read_file(path: &Path) -> Result<String, FormatError> {
    std::fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), FormatError> {
    let io = |source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io)?;
    }
    std::fs::write(path, contents).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn syntax(file: &str, line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Syntax {
        file: file.to_string(),
        line,
        message: message.into(),
    }
}

/// Non-blank lines with their 1-based numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn field<T: std::str::FromStr>(file: &str, line: usize, cell: &str, what: &str) -> Result<T, FormatError> {
    cell.trim()
        .parse()
        .map_err(|_| syntax(file, line, format!("bad {what} {cell:?}")))
}

fn expect_header(file: &str, got: Option<(usize, &str)>, want: &[&str]) -> Result<usize, FormatError> {
    let (line, header) = got.ok_or_else(|| syntax(file, 1, "missing header"))?;
    let cells: Vec<&str> = header.split(',').map(str::trim).collect();
    if cells.len() < want.len() || cells[..want.len()] != *want {
        return Err(syntax(file, line, format!("header must start with {}", want.join(","))));
    }
    Ok(cells.len())
}

/// `session,window_start,label,f0..f{D-1}`, one row per window.
pub fn write_features(m: &FeatureMatrix) -> String {
    let mut out = String::from("session,window_start,label");
    for d in 0..m.dim() {
        let _ = write!(out, ",f{d}");
    }
    out.push('\n');
    for i in 0..m.len() {
        let _ = write!(out, "{},{},{}", m.sessions()[i], m.window_start()[i], m.labels()[i]);
        for v in m.row(i) {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn read_features(text: &str) -> Result<FeatureMatrix, FormatError> {
    const FILE: &str = FEATURES_FILE;
    let mut rows = lines(text);
    let width = expect_header(FILE, rows.next(), &["session", "window_start", "label"])?;
    let dim = width - 3;
    let (mut values, mut labels, mut starts, mut sessions) = (vec![], vec![], vec![], vec![]);
    for (line, row) in rows {
        let cells: Vec<&str> = row.split(',').collect();
        if cells.len() != width {
            return Err(syntax(
                FILE,
                line,
                format!("expected {width} cells, found {}", cells.len()),
            ));
        }
        sessions.push(field::<u32>(FILE, line, cells[0], "session")?);
        starts.push(field::<f64>(FILE, line, cells[1], "window start")?);
        labels.push(field::<TaskId>(FILE, line, cells[2], "label")?);
        for c in &cells[3..] {
            values.push(field::<f64>(FILE, line, c, "feature value")?);
        }
    }
    FeatureMatrix::new(dim, values, labels, starts, sessions).map_err(|e| syntax(FILE, 0, e.to_string()))
}

/// Subject and task vocabulary shared by every stage after ingest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Study {
    pub subject: String,
    pub tasks: Vec<String>,
}

impl Study {
    pub fn task_set(&self) -> Result<TaskSet, FormatError> {
        TaskSet::new(self.tasks.clone()).map_err(|e| FormatError::Json {
            file: STUDY_FILE.into(),
            message: e.to_string(),
        })
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("plain data serializes");
    s.push('\n');
    s
}

fn from_json<T: for<'de> Deserialize<'de>>(file: &str, text: &str) -> Result<T, FormatError> {
    serde_json::from_str(text).map_err(|e| FormatError::Json {
        file: file.into(),
        message: e.to_string(),
    })
}

pub fn write_study(s: &Study) -> String {
    to_json(s)
}

pub fn read_study(text: &str) -> Result<Study, FormatError> {
    from_json(STUDY_FILE, text)
}

/// `row,rule`, one line per rule that fired on a row.
pub fn write_clean_csv(report: &CleanReport) -> String {
    let mut out = String::from("row,rule\n");
    for (row, rules) in report.flagged() {
        for rule in rules.rules() {
            let _ = writeln!(out, "{row},{}", rule.name());
        }
    }
    out
}

pub fn write_clean_summary(name: &str, report: &CleanReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "recording: {name}");
    let _ = writeln!(out, "rows read: {}", report.rows_in());
    let _ = writeln!(out, "rows excluded: {}", report.flagged().len());
    let _ = writeln!(out, "rows kept: {}", report.rows_out());
    let _ = writeln!(out, "rows flagged per rule:");
    for rule in Rule::ALL {
        let _ = writeln!(out, "  {}: {}", rule.name(), report.count(rule));
    }
    out
}

/// `spec,fold,accuracy`; failed folds have an empty accuracy cell.
pub fn write_scores_csv(scores: &[ModelScore]) -> String {
    let mut out = String::from("spec,fold,accuracy\n");
    for s in scores {
        for (fold, acc) in s.fold_accuracies.iter().enumerate() {
            let _ = write!(out, "{},{fold},", s.spec.name);
            if let Some(a) = acc {
                let _ = write!(out, "{a}");
            }
            out.push('\n');
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub spec: String,
    pub family: String,
    pub mean_accuracy: f64,
    pub failed_folds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub cv: String,
    pub folds: usize,
    pub models: Vec<ModelSummary>,
    pub top_two: [String; 2],
}

pub fn write_scores_json(s: &ScoreSummary) -> String {
    to_json(s)
}

pub fn read_scores_json(text: &str) -> Result<ScoreSummary, FormatError> {
    from_json(SCORES_JSON, text)
}

/// `session,window_start,raw_label,smoothed_label,source`, traces in order.
pub fn write_traces(traces: &[PredictionTrace]) -> String {
    let mut out = String::from("session,window_start,raw_label,smoothed_label,source\n");
    for t in traces {
        for i in 0..t.len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                t.session, t.window_start[i], t.raw[i], t.smoothed[i], t.source
            );
        }
    }
    out
}

/// Groups consecutive rows sharing a session and source into one trace.
pub fn read_traces(text: &str) -> Result<Vec<PredictionTrace>, FormatError> {
    const FILE: &str = TRACES_FILE;
    let mut rows = lines(text);
    expect_header(
        FILE,
        rows.next(),
        &["session", "window_start", "raw_label", "smoothed_label", "source"],
    )?;
    let mut out: Vec<PredictionTrace> = Vec::new();
    for (line, row) in rows {
        let cells: Vec<&str> = row.splitn(5, ',').collect();
        if cells.len() != 5 {
            return Err(syntax(FILE, line, "expected 5 cells"));
        }
        let session = field::<u32>(FILE, line, cells[0], "session")?;
        let start = field::<f64>(FILE, line, cells[1], "window start")?;
        let raw = field::<TaskId>(FILE, line, cells[2], "label")?;
        let smoothed = field::<TaskId>(FILE, line, cells[3], "label")?;
        let source = cells[4].trim();
        match out.last_mut() {
            Some(t) if t.session == session && t.source == source => {
                t.window_start.push(start);
                t.raw.push(raw);
                t.smoothed.push(smoothed);
            }
            _ => out.push(PredictionTrace {
                session,
                source: source.to_string(),
                window_start: vec![start],
                raw: vec![raw],
                smoothed: vec![smoothed],
            }),
        }
    }
    Ok(out)
}

/// A trained classifier with the feature scaling it was trained under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub standardizer: Standardizer,
    pub model: TrainedModel,
}

impl ModelFile {
    pub fn new(standardizer: Standardizer, model: TrainedModel) -> Self {
        Self {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            standardizer,
            model,
        }
    }
}

pub fn write_model(m: &ModelFile) -> String {
    to_json(m)
}

pub fn read_model(file: &str, text: &str) -> Result<ModelFile, FormatError> {
    let m: ModelFile = from_json(file, text)?;
    if m.format != MODEL_FORMAT || m.version != MODEL_VERSION {
        return Err(FormatError::Json {
            file: file.into(),
            message: format!(
                "unsupported model format {:?} version {} (expected {MODEL_FORMAT:?} version {MODEL_VERSION})",
                m.format, m.version
            ),
        });
    }
    Ok(m)
}

pub fn model_file_name(spec: &str) -> String {
    format!("model_{spec}.json")
}
