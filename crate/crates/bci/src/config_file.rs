//! TOML form of [`PipelineConfig`].
//!
//! Every key is optional and falls back to its default. Nested settings use
//! dotted keys or sections, e.g. `clean.band_power_min = -4` or
//! `[models.knn]` followed by `k = 7`. Unknown keys are rejected.

use std::path::Path;

use bci_core::{validate_config, ConfigViolation, PipelineConfig};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Read { path: String, message: String },
    #[error("{}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<ConfigViolation>),
}

pub fn parse_config(text: &str) -> Result<PipelineConfig, toml::de::Error> {
    toml::from_str(text)
}

pub fn config_to_toml(config: &PipelineConfig) -> String {
    toml::to_string(config).expect("configuration serializes to TOML")
}

/// Reads and validates a config file.
pub fn load_config(path: &Path) -> Result<PipelineConfig, ConfigError> {
    let read = |message: String| ConfigError::Read {
        path: path.display().to_string(),
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| read(e.to_string()))?;
    let config = parse_config(&text).map_err(|e| read(e.to_string().trim_end().to_string()))?;
    validate_config(config).map_err(ConfigError::Invalid)
}
