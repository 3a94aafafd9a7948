//! Pipeline stages over files. Each stage reads what the previous one wrote,
//! so stages can be run one at a time or chained by [`pipeline`].
//!
//! ```text
//! recordings + manifests ─clean─► cleaned/ ─features─► features.csv, study.json
//!   ─evaluate─► scores.csv, scores.json ─train─► model_<spec>.json
//!   ─tmv─► traces.csv ─report─► timeline_subject<id>.svg/.csv, heatmap_subject<id>.svg/.csv
//! ```

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};

use bci_core::clean::{apply_exclusions, flag_noise};
use bci_core::eval::{confusion, cross_validate, make_cv_plan, select_top_two, ModelScore};
use bci_core::features::{extract_features, window, ExtractTally};
use bci_core::learn::train;
use bci_core::synth::{generate_study, inject_artifacts, ArtifactKind, StudyParams};
use bci_core::tmv::{block_accuracy, traces_from_predictions, FUSED_SOURCE};
use bci_core::{
    derive_seed, CleanReport, FeatureMatrix, ModelSpec, PipelineConfig, PredictionTrace, Recording, Segment,
    SessionManifest, Standardizer, TaskId, TaskSet,
};

use crate::exec::RayonExecutor;
use crate::formats::{self, ModelFile, ModelSummary, ScoreSummary, Study};
use crate::ingest::{self, SchemaSource};
use crate::report;

pub const CLEANED_DIR: &str = "cleaned";

/// A failure inside one named stage.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub message: String,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.stage, self.message)
    }
}

impl std::error::Error for StageError {}

fn fail<E: fmt::Display>(stage: &'static str) -> impl Fn(E) -> StageError {
    move |e| StageError {
        stage,
        message: e.to_string(),
    }
}

/// Stage settings shared by every stage.
pub struct Context {
    pub config: PipelineConfig,
    pub exec: RayonExecutor,
}

impl Context {
    fn task_set(&self) -> (TaskSet, bool) {
        if self.config.tasks.is_empty() {
            (TaskSet::default(), false)
        } else {
            (
                TaskSet::new(self.config.tasks.clone()).expect("validated task list"),
                true,
            )
        }
    }

    fn load(&self, stage: &'static str, dir: &Path) -> Result<(Vec<ingest::Session>, TaskSet), StageError> {
        let (mut tasks, fixed) = self.task_set();
        let schema = SchemaSource::Infer {
            sample_rate_hz: self.config.sample_rate_hz,
        };
        let sessions = ingest::load_session_set(dir, &schema, &mut tasks, fixed).map_err(fail(stage))?;
        Ok((sessions, tasks))
    }
}

/// Keeps file names to `[A-Za-z0-9_-]`.
pub fn file_safe(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub struct SynthOptions {
    pub study: StudyParams,
    pub artifacts: Vec<ArtifactKind>,
    pub artifact_rate: f64,
}

/// Writes a synthetic study as recording and manifest files. Returns the
/// injected artifact rows per session, if any were requested.
pub fn synth(opts: &SynthOptions, out: &Path) -> Result<Vec<Vec<(usize, ArtifactKind)>>, StageError> {
    const STAGE: &str = "synth";
    let study = generate_study(&opts.study);
    let mut truth = Vec::with_capacity(study.len());
    let sessions: Vec<(Recording, SessionManifest)> = study
        .into_iter()
        .map(|(rec, manifest)| {
            if opts.artifacts.is_empty() || opts.artifact_rate == 0.0 {
                truth.push(Vec::new());
                return (rec, manifest);
            }
            let seed = derive_seed(opts.study.seed, "synth-artifacts", u64::from(rec.session_index()));
            let (dirty, rows) = inject_artifacts(&rec, &opts.artifacts, opts.artifact_rate, seed);
            truth.push(rows);
            (dirty, manifest)
        })
        .collect();
    ingest::write_session_set(out, &sessions, &TaskSet::numbered(opts.study.tasks)).map_err(fail(STAGE))?;
    Ok(truth)
}

/// Moves a recording's first kept row to time 0 and shifts the manifest
/// along with it, so re-reading the written file lines up with its manifest.
fn rebase_session(rec: Recording, manifest: &SessionManifest) -> (Recording, SessionManifest) {
    let t0 = rec.samples().first().map_or(0.0, |s| s.timestamp);
    let (rec, manifest) = if t0 == 0.0 {
        (rec, manifest.clone())
    } else {
        let samples = rec
            .samples()
            .iter()
            .cloned()
            .map(|mut s| {
                s.timestamp -= t0;
                s
            })
            .collect();
        let segments = manifest
            .segments()
            .iter()
            .filter(|s| s.end - t0 > 0.0)
            .map(|s| Segment {
                task: s.task,
                start: (s.start - t0).max(0.0),
                end: s.end - t0,
            })
            .collect();
        let shifted = SessionManifest::new(segments).expect("shifting keeps segments ordered");
        (rec.with_samples(samples), shifted)
    };
    let clipped = manifest.clip_to(rec.duration());
    (rec, clipped)
}

pub struct CleanOutcome {
    pub reports: Vec<CleanReport>,
}

/// Flags noisy rows, writes the surviving rows with their manifests, and a
/// `<stem>.clean.csv` / `<stem>.clean.txt` report per session.
pub fn clean(ctx: &Context, input: &Path, out: &Path) -> Result<CleanOutcome, StageError> {
    const STAGE: &str = "clean";
    let (sessions, tasks) = ctx.load(STAGE, input)?;
    let mut written = Vec::with_capacity(sessions.len());
    let mut reports = Vec::with_capacity(sessions.len());
    for s in sessions {
        let report = flag_noise(&s.recording, &ctx.config.clean);
        let kept = apply_exclusions(&s.recording, &report).map_err(fail(STAGE))?;
        let stem = ingest::session_stem(s.recording.subject_id(), s.recording.session_index());
        log::info!(
            "{stem}: excluded {} of {} rows",
            report.flagged().len(),
            report.rows_in()
        );
        formats::write_file(
            &out.join(format!("{stem}.clean.csv")),
            formats::write_clean_csv(&report),
        )
        .map_err(fail(STAGE))?;
        formats::write_file(
            &out.join(format!("{stem}.clean.txt")),
            formats::write_clean_summary(&stem, &report),
        )
        .map_err(fail(STAGE))?;
        written.push(rebase_session(kept, &s.manifest));
        reports.push(report);
    }
    ingest::write_session_set(out, &written, &tasks).map_err(fail(STAGE))?;
    Ok(CleanOutcome { reports })
}

/// Windows every session and writes `features.csv` plus `study.json`.
pub fn features(ctx: &Context, input: &Path, out: &Path) -> Result<ExtractTally, StageError> {
    const STAGE: &str = "features";
    let c = &ctx.config;
    let (sessions, tasks) = ctx.load(STAGE, input)?;
    let width = sessions[0].recording.schema().band_power_len();
    let mut matrix = FeatureMatrix::empty(bci_core::features::feature_dim(width, c.feature_std));
    let mut total = ExtractTally::default();
    for s in &sessions {
        let spans = window(s.recording.len(), c.window_rows, c.window_overlap_rows);
        let (m, tally) = extract_features(&s.recording, &spans, &s.manifest, c.feature_std);
        matrix.append(&m).map_err(fail(STAGE))?;
        total.kept += tally.kept;
        total.unlabeled += tally.unlabeled;
        total.non_finite += tally.non_finite;
    }
    log::info!(
        "{} windows kept, {} unlabeled, {} with non-finite values",
        total.kept,
        total.unlabeled,
        total.non_finite
    );
    let study = Study {
        subject: sessions[0].recording.subject_id().to_string(),
        tasks: tasks.names().to_vec(),
    };
    formats::write_file(&out.join(formats::FEATURES_FILE), formats::write_features(&matrix)).map_err(fail(STAGE))?;
    formats::write_file(&out.join(formats::STUDY_FILE), formats::write_study(&study)).map_err(fail(STAGE))?;
    Ok(total)
}

fn read_inputs(stage: &'static str, dir: &Path) -> Result<(FeatureMatrix, Study), StageError> {
    let text = formats::read_file(&dir.join(formats::FEATURES_FILE)).map_err(fail(stage))?;
    let matrix = formats::read_features(&text).map_err(fail(stage))?;
    let text = formats::read_file(&dir.join(formats::STUDY_FILE)).map_err(fail(stage))?;
    let study = formats::read_study(&text).map_err(fail(stage))?;
    if let Some(&l) = matrix.labels().iter().find(|&&l| usize::from(l) >= study.tasks.len()) {
        return Err(StageError {
            stage,
            message: format!(
                "label {l} is outside the {} tasks of {}",
                study.tasks.len(),
                formats::STUDY_FILE
            ),
        });
    }
    Ok((matrix, study))
}

fn spec_named(stage: &'static str, ctx: &Context, name: &str) -> Result<ModelSpec, StageError> {
    let all = ctx.config.models.clone();
    bci_core::Family::REGISTRY
        .iter()
        .map(|f| all.spec(*f))
        .find(|s| s.name == name || s.family().to_string() == name)
        .or_else(|| name.parse().ok().map(|f| all.spec(f)))
        .ok_or_else(|| StageError {
            stage,
            message: format!("unknown model {name:?}"),
        })
}

/// Fits `model` on every window, with standardization fitted on the same
/// windows, and writes `model_<spec>.json`. Returns the written path.
pub fn train_model(ctx: &Context, dir: &Path, model: &str, out: &Path) -> Result<PathBuf, StageError> {
    const STAGE: &str = "train";
    let spec = spec_named(STAGE, ctx, model)?;
    let (matrix, _) = read_inputs(STAGE, dir)?;
    let scaler = Standardizer::fit(&matrix);
    let scaled = scaler.transform(&matrix).map_err(fail(STAGE))?;
    // fold seeds use indices 0..folds; the final fit sits past them
    let seed = derive_seed(ctx.config.master_seed, &spec.seed_purpose, u64::MAX);
    let trained = train(&spec, &scaled, seed, &ctx.exec).map_err(fail(STAGE))?;
    let path = out.join(formats::model_file_name(&file_safe(&spec.name)));
    formats::write_file(&path, formats::write_model(&ModelFile::new(scaler, trained))).map_err(fail(STAGE))?;
    Ok(path)
}

fn cross_validate_specs(
    stage: &'static str,
    ctx: &Context,
    specs: &[ModelSpec],
    matrix: &FeatureMatrix,
    tasks: usize,
) -> Result<Vec<ModelScore>, StageError> {
    let plan = make_cv_plan(matrix, ctx.config.cv, ctx.config.master_seed).map_err(fail(stage))?;
    let scores = cross_validate(specs, matrix, &plan, ctx.config.master_seed, tasks, &ctx.exec);
    for s in &scores {
        for (fold, e) in &s.failures {
            log::warn!("{} fold {fold}: {e}", s.spec.name);
        }
    }
    Ok(scores)
}

/// Cross-validates every configured family, writes `scores.csv` and
/// `scores.json`, and returns the names of the top two.
pub fn evaluate(ctx: &Context, dir: &Path, out: &Path) -> Result<[String; 2], StageError> {
    const STAGE: &str = "evaluate";
    let (matrix, study) = read_inputs(STAGE, dir)?;
    let specs = ctx.config.specs();
    let scores = cross_validate_specs(STAGE, ctx, &specs, &matrix, study.tasks.len())?;
    let (a, b) = select_top_two(&scores).map_err(fail(STAGE))?;
    let top_two = [a.spec.name.clone(), b.spec.name.clone()];
    let summary = ScoreSummary {
        cv: ctx.config.cv.to_string(),
        folds: scores.first().map_or(0, |s| s.fold_accuracies.len()),
        models: scores
            .iter()
            .map(|s| ModelSummary {
                spec: s.spec.name.clone(),
                family: s.spec.family().to_string(),
                mean_accuracy: s.mean_accuracy,
                failed_folds: s.failures.len(),
            })
            .collect(),
        top_two: top_two.clone(),
    };
    for s in &summary.models {
        log::info!("{}: mean accuracy {:.4}", s.spec, s.mean_accuracy);
    }
    formats::write_file(&out.join(formats::SCORES_CSV), formats::write_scores_csv(&scores)).map_err(fail(STAGE))?;
    formats::write_file(&out.join(formats::SCORES_JSON), formats::write_scores_json(&summary)).map_err(fail(STAGE))?;
    Ok(top_two)
}

/// Recomputes out-of-fold predictions of the two models chosen by
/// `evaluate`, smooths them per session and writes `traces.csv`.
pub fn tmv(ctx: &Context, dir: &Path, out: &Path) -> Result<Vec<PredictionTrace>, StageError> {
    const STAGE: &str = "tmv";
    let (matrix, study) = read_inputs(STAGE, dir)?;
    let text = formats::read_file(&dir.join(formats::SCORES_JSON)).map_err(fail(STAGE))?;
    let summary = formats::read_scores_json(&text).map_err(fail(STAGE))?;
    let specs = summary
        .top_two
        .iter()
        .map(|n| spec_named(STAGE, ctx, n))
        .collect::<Result<Vec<_>, _>>()?;
    let scores = cross_validate_specs(STAGE, ctx, &specs, &matrix, study.tasks.len())?;
    let block = ctx.config.tmv_block_windows;
    let traces = traces_from_predictions(
        &matrix,
        (&scores[0].spec.name, &scores[0].predictions),
        (&scores[1].spec.name, &scores[1].predictions),
        block,
    )
    .map_err(fail(STAGE))?;
    for t in traces.iter().filter(|t| t.source == FUSED_SOURCE) {
        let designed: Vec<TaskId> = matrix
            .rows_of_session(t.session)
            .iter()
            .map(|&r| matrix.labels()[r])
            .collect();
        log::info!(
            "session {}: fused block accuracy {:.4}",
            t.session,
            block_accuracy(&designed, &t.smoothed, block)
        );
    }
    formats::write_file(&out.join(formats::TRACES_FILE), formats::write_traces(&traces)).map_err(fail(STAGE))?;
    Ok(traces)
}

/// Designed label of every traced window, looked up by session and start
/// time in the feature matrix.
pub fn designed_labels(matrix: &FeatureMatrix, trace: &PredictionTrace) -> Option<Vec<TaskId>> {
    let index: HashMap<(u32, u64), TaskId> = (0..matrix.len())
        .map(|i| {
            (
                (matrix.sessions()[i], matrix.window_start()[i].to_bits()),
                matrix.labels()[i],
            )
        })
        .collect();
    trace
        .window_start
        .iter()
        .map(|t| index.get(&(trace.session, t.to_bits())).copied())
        .collect()
}

pub struct ReportFiles {
    pub timeline_svg: PathBuf,
    pub heatmap_svg: PathBuf,
}

/// Renders the prediction timeline from `traces.csv` and the heatmap of the
/// fused smoothed labels against the designed tasks.
pub fn report(dir: &Path, out: &Path) -> Result<ReportFiles, StageError> {
    const STAGE: &str = "report";
    let (matrix, study) = read_inputs(STAGE, dir)?;
    let tasks = study.task_set().map_err(fail(STAGE))?;
    let text = formats::read_file(&dir.join(formats::TRACES_FILE)).map_err(fail(STAGE))?;
    let traces = formats::read_traces(&text).map_err(fail(STAGE))?;

    let timeline = report::render_timeline(&traces, &tasks, &study.subject).map_err(fail(STAGE))?;
    let heat_source = if traces.iter().any(|t| t.source == FUSED_SOURCE) {
        FUSED_SOURCE
    } else {
        traces[0].source.as_str()
    };
    let mut cm = bci_core::ConfusionMatrix::zeros(tasks.len());
    for t in traces.iter().filter(|t| t.source == heat_source) {
        let designed = designed_labels(&matrix, t).ok_or_else(|| StageError {
            stage: STAGE,
            message: format!(
                "session {} has windows missing from {}",
                t.session,
                formats::FEATURES_FILE
            ),
        })?;
        cm.add(&confusion(&designed, &t.smoothed, tasks.len()).map_err(fail(STAGE))?);
    }
    let heatmap = report::render_heatmap(&cm, &tasks, &study.subject).map_err(fail(STAGE))?;

    let subject = file_safe(&study.subject);
    let write = |name: String, body: &str| -> Result<PathBuf, StageError> {
        let path = out.join(name);
        formats::write_file(&path, body).map_err(fail(STAGE))?;
        Ok(path)
    };
    let timeline_svg = write(format!("timeline_subject{subject}.svg"), &timeline.svg)?;
    write(format!("timeline_subject{subject}.csv"), &timeline.csv)?;
    let heatmap_svg = write(format!("heatmap_subject{subject}.svg"), &heatmap.svg)?;
    write(format!("heatmap_subject{subject}.csv"), &heatmap.csv)?;
    Ok(ReportFiles {
        timeline_svg,
        heatmap_svg,
    })
}

/// Every stage in order: cleaned recordings go to `out/cleaned`, everything
/// else to `out`.
pub fn pipeline(ctx: &Context, input: &Path, out: &Path) -> Result<[String; 2], StageError> {
    let cleaned = out.join(CLEANED_DIR);
    clean(ctx, input, &cleaned)?;
    features(ctx, &cleaned, out)?;
    let top_two = evaluate(ctx, out, out)?;
    for name in &top_two {
        train_model(ctx, out, name, out)?;
    }
    tmv(ctx, out, out)?;
    report(out, out)?;
    Ok(top_two)
}

#[cfg(test)]
mod tests {
    use super::*;
    use bci_core::Sample;

    #[test]
    fn rebasing_moves_manifest_with_the_rows() {
        let schema = bci_core::Schema::new(vec!["TP9".into()], vec!["alpha".into()], 10.0).unwrap();
        let samples = (3..20)
            .map(|i| Sample {
                timestamp: i as f64 / 10.0,
                band_power: vec![0.0],
                contact: vec![],
                headband_on: None,
            })
            .collect();
        let rec = Recording::new(schema, "1".to_string(), 1, samples).unwrap();
        let manifest = SessionManifest::new(vec![
            Segment {
                task: 0,
                start: 0.0,
                end: 1.0,
            },
            Segment {
                task: 1,
                start: 1.0,
                end: 2.0,
            },
        ])
        .unwrap();
        let before: Vec<Option<TaskId>> = rec.samples().iter().map(|s| manifest.task_at(s.timestamp)).collect();
        let (r2, m2) = rebase_session(rec, &manifest);
        assert_eq!(r2.samples()[0].timestamp, 0.0);
        let after: Vec<Option<TaskId>> = r2.samples().iter().map(|s| m2.task_at(s.timestamp)).collect();
        assert_eq!(before, after);
        assert!(m2.check_range(r2.duration()).is_ok());
    }

    #[test]
    fn file_names_are_sanitized() {
        assert_eq!(file_safe("S-01_a"), "S-01_a");
        assert_eq!(file_safe("../x y"), "___x_y");
    }
}
