//! Core algorithms for classifying cognitive tasks from consumer-headset
//! EEG band-power streams.
//!
//! The crate is `no_std` (it needs `alloc`) and performs no IO. File
//! formats, configuration files, rendering and the command line live in the
//! companion `bci` crate.
//!
//! ```text
//! Recording ──clean::flag_noise──► CleanReport ──clean::apply_exclusions──► Recording
//!     │
//!     └─features::window + features::extract_features──► FeatureMatrix
//!            │
//!            ├─eval::make_cv_plan + eval::cross_validate──► ModelScore (×5 families)
//!            │        └─eval::select_top_two
//!            └─tmv::traces_from_predictions / tmv::tmv_pipeline──► PredictionTrace
//! ```
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod clean;
pub mod config;
pub mod eval;
pub mod exec;
pub mod features;
pub mod learn;
pub mod seed;
pub mod synth;
pub mod tmv;
pub mod types;

pub use clean::{CleanReport, CleanRules, Rule, RuleSet};
pub use config::{validate_config, ConfigViolation, CvMode, ModelParams, PipelineConfig};
pub use eval::{ConfusionMatrix, CvPlan, ModelScore};
pub use exec::{Executor, Sequential};
pub use features::{FeatureMatrix, Standardizer};
pub use learn::{Family, ModelSpec, TrainedModel};
pub use seed::derive_seed;
pub use tmv::PredictionTrace;
pub use types::{Recording, Sample, Schema, Segment, SessionManifest, TaskId, TaskSet};
