//! Command-line interface: `bci <subcommand> [flags]`.

use std::path::{Path, PathBuf};

use bci_core::synth::{ArtifactKind, StudyParams};
use bci_core::{validate_config, CvMode, PipelineConfig, Schema};
use clap::{Args, Parser, Subcommand};

use crate::config_file::load_config;
use crate::exec::RayonExecutor;
use crate::stages::{self, Context, StageError, SynthOptions};

#[derive(Debug, Parser)]
#[command(
    name = "bci",
    version,
    about = "Classify cognitive tasks from EEG band-power recordings"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Input directory.
    #[arg(long = "in", global = true, value_name = "DIR")]
    pub input: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Master seed for every random choice.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Worker threads (0 = one per core). Results do not depend on it.
    #[arg(long, global = true, value_name = "N", default_value_t = 0)]
    pub threads: usize,
    /// Windows per time-majority-voting block.
    #[arg(long, global = true, value_name = "N")]
    pub block_windows: Option<usize>,
    /// Band-power rows per feature window.
    #[arg(long, global = true, value_name = "N")]
    pub window_rows: Option<usize>,
    /// Cross-validation mode: loso or kfold:K.
    #[arg(long, global = true, value_name = "MODE")]
    pub cv: Option<CvMode>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Generate a synthetic study with known task labels.
    Synth(SynthArgs),
    /// Flag and exclude noisy rows; write cleaned recordings and reports.
    Clean,
    /// Window recordings into features.csv and study.json.
    Features,
    /// Fit one model on all windows.
    Train {
        /// Model family or spec name, e.g. random_forest or svm.
        #[arg(long)]
        model: String,
    },
    /// Cross-validate every family, write scores and print the top two.
    Evaluate,
    /// Smooth the top two models' predictions into traces.csv.
    Tmv,
    /// Render timeline and heatmap SVG and CSV files.
    Report,
    /// Run clean, features, evaluate, train, tmv and report in order.
    Pipeline,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 4)]
    pub tasks: usize,
    #[arg(long, default_value_t = 6)]
    pub sessions: usize,
    #[arg(long, default_value_t = 40.0)]
    pub segment_seconds: f64,
    /// Mean shift of each task's own band-power columns.
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    /// Standard deviation of the Gaussian noise.
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    #[arg(long, default_value = "1")]
    pub subject: String,
    /// Fraction of rows to corrupt per artifact kind.
    #[arg(long, default_value_t = 0.0)]
    pub artifact_rate: f64,
    /// Artifact kinds to inject: flatline, out_of_range, dropout.
    #[arg(long, value_delimiter = ',', default_value = "flatline,out_of_range")]
    pub artifacts: Vec<String>,
}

fn parse_artifact(name: &str) -> Option<ArtifactKind> {
    match name.trim() {
        "flatline" => Some(ArtifactKind::Flatline),
        "out_of_range" => Some(ArtifactKind::OutOfRange),
        "dropout" => Some(ArtifactKind::Dropout),
        _ => None,
    }
}

/// What went wrong before or during a stage.
#[derive(Debug)]
pub enum CliError {
    /// Bad or missing flags; exit code 2.
    Usage(String),
    /// A stage failed; exit code 1.
    Stage(StageError),
}

impl From<StageError> for CliError {
    fn from(e: StageError) -> Self {
        CliError::Stage(e)
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn config_error(message: String) -> CliError {
    CliError::Stage(StageError {
        stage: "config",
        message,
    })
}

/// Config file values, then flag overrides, then validation.
pub fn resolve_config(common: &Common) -> Result<PipelineConfig, CliError> {
    let mut c = match &common.config {
        Some(path) => load_config(path).map_err(|e| config_error(e.to_string()))?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = common.seed {
        c.master_seed = s;
    }
    if let Some(b) = common.block_windows {
        c.tmv_block_windows = b;
    }
    if let Some(w) = common.window_rows {
        c.window_rows = w;
    }
    if let Some(cv) = common.cv {
        c.cv = cv;
    }
    validate_config(c).map_err(|v| config_error(v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")))
}

fn need<'a>(p: &'a Option<PathBuf>, flag: &str, command: &str) -> Result<&'a Path, CliError> {
    p.as_deref()
        .ok_or_else(|| usage(format!("`{command}` needs --{flag} DIR")))
}

/// Runs one subcommand and returns the text to print on stdout.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    let config = resolve_config(&cli.common)?;
    let exec = RayonExecutor::new(cli.common.threads).map_err(|e| usage(e.to_string()))?;
    let ctx = Context { config, exec };
    let c = &cli.common;
    match &cli.command {
        Command::Synth(a) => {
            let out = need(&c.out, "out", "synth")?;
            let artifacts = a
                .artifacts
                .iter()
                .filter(|s| !s.trim().is_empty())
                .map(|s| parse_artifact(s).ok_or_else(|| usage(format!("unknown artifact kind {s:?}"))))
                .collect::<Result<Vec<_>, _>>()?;
            if !(0.0..=1.0).contains(&a.artifact_rate) {
                return Err(usage("--artifact-rate must lie in [0, 1]"));
            }
            if a.tasks < 2 || a.sessions < 1 || a.delta.is_nan() || a.delta < 0.0 || a.noise.is_nan() || a.noise < 0.0 {
                return Err(usage(
                    "synth needs --tasks >= 2, --sessions >= 1 and non-negative --delta and --noise",
                ));
            }
            let samples = a.segment_seconds * ctx.config.sample_rate_hz;
            if samples.is_nan() || samples < 0.5 {
                return Err(usage("--segment-seconds is shorter than one sample"));
            }
            let schema = Schema::default()
                .with_sample_rate(ctx.config.sample_rate_hz)
                .map_err(|e| usage(e.to_string()))?;
            let opts = SynthOptions {
                study: StudyParams {
                    tasks: a.tasks,
                    sessions: a.sessions,
                    segment_seconds: a.segment_seconds,
                    schema,
                    delta: a.delta,
                    noise: a.noise,
                    seed: ctx.config.master_seed,
                    subject_id: a.subject.clone(),
                },
                artifacts,
                artifact_rate: a.artifact_rate,
            };
            let truth = stages::synth(&opts, out)?;
            let injected: usize = truth.iter().map(Vec::len).sum();
            Ok(format!(
                "wrote {} sessions to {} ({injected} artifact rows)\n",
                a.sessions,
                out.display()
            ))
        }
        Command::Clean => {
            let outcome = stages::clean(&ctx, need(&c.input, "in", "clean")?, need(&c.out, "out", "clean")?)?;
            let flagged: usize = outcome.reports.iter().map(|r| r.flagged().len()).sum();
            let rows: usize = outcome.reports.iter().map(|r| r.rows_in()).sum();
            Ok(format!("excluded {flagged} of {rows} rows\n"))
        }
        Command::Features => {
            let t = stages::features(
                &ctx,
                need(&c.input, "in", "features")?,
                need(&c.out, "out", "features")?,
            )?;
            Ok(format!("{} windows\n", t.kept))
        }
        Command::Train { model } => {
            let input = need(&c.input, "in", "train")?;
            let path = stages::train_model(&ctx, input, model, need(&c.out, "out", "train")?)?;
            Ok(format!("wrote {}\n", path.display()))
        }
        Command::Evaluate => {
            let [a, b] = stages::evaluate(
                &ctx,
                need(&c.input, "in", "evaluate")?,
                need(&c.out, "out", "evaluate")?,
            )?;
            Ok(format!("top two: {a}, {b}\n"))
        }
        Command::Tmv => {
            let traces = stages::tmv(&ctx, need(&c.input, "in", "tmv")?, need(&c.out, "out", "tmv")?)?;
            Ok(format!("{} traces\n", traces.len()))
        }
        Command::Report => {
            let files = stages::report(need(&c.input, "in", "report")?, need(&c.out, "out", "report")?)?;
            Ok(format!(
                "wrote {} and {}\n",
                files.timeline_svg.display(),
                files.heatmap_svg.display()
            ))
        }
        Command::Pipeline => {
            let [a, b] = stages::pipeline(
                &ctx,
                need(&c.input, "in", "pipeline")?,
                need(&c.out, "out", "pipeline")?,
            )?;
            Ok(format!("top two: {a}, {b}\n"))
        }
    }
}
