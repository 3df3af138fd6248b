//! Analysis configuration: a TOML file, overridable from the command line.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::TokenizerConfig;
use crate::metrics::{AbstractivenessMode, ScoreMode};
use crate::regression::RegressionSpec;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid TOML config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid JSON config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
    Markdown,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            "md" | "markdown" => Ok(Self::Markdown),
            other => Err(format!("unknown output format {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RepeatsConfig {
    pub limit: usize,
    pub min_count: usize,
    pub with_ids: bool,
}

impl Default for RepeatsConfig {
    fn default() -> Self {
        Self {
            limit: 50,
            min_count: 2,
            with_ids: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub tokenizer: TokenizerConfig,
    pub min_n: usize,
    pub score_mode: ScoreMode,
    pub abstractiveness_ns: Vec<usize>,
    pub abstractiveness_mode: AbstractivenessMode,
    pub repeats: RepeatsConfig,
    pub regression: RegressionSpec,
    pub output_dir: PathBuf,
    pub output_formats: BTreeSet<OutputFormat>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            tokenizer: TokenizerConfig::default(),
            min_n: 4,
            score_mode: ScoreMode::AllNgrams,
            abstractiveness_ns: vec![1, 2, 3, 4],
            abstractiveness_mode: AbstractivenessMode::InstanceWeighted,
            repeats: RepeatsConfig::default(),
            regression: RegressionSpec::default(),
            output_dir: PathBuf::from("repscope-out"),
            output_formats: [OutputFormat::Csv, OutputFormat::Json, OutputFormat::Markdown].into(),
        }
    }
}

#[derive(Deserialize)]
struct ManifestConfig {
    config: AnalysisConfig,
}

impl AnalysisConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// Reads a TOML config, or the `config` object of a JSON run manifest.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if path.extension().is_some_and(|e| e == "json") {
            let config = serde_json::from_str::<ManifestConfig>(&text)?.config;
            config.validate()?;
            Ok(config)
        } else {
            Self::from_toml_str(&text)
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.min_n == 0 {
            return Err(ConfigError::Invalid("min_n must be at least 1".into()));
        }
        if self.abstractiveness_ns.contains(&0) {
            return Err(ConfigError::Invalid("abstractiveness_ns entries must be >= 1".into()));
        }
        if self.repeats.limit == 0 {
            return Err(ConfigError::Invalid("repeats.limit must be at least 1".into()));
        }
        let level = self.regression.confidence_level;
        if !(level > 0.0 && level < 1.0) {
            return Err(ConfigError::Invalid(format!(
                "confidence level must lie in (0, 1), got {level}"
            )));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}
