//! One JSON document configuring a whole run; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohort::SimulationScenario;
use crate::metrics::{DEFAULT_WEIGHT_CAP, MIN_RESAMPLES};
use crate::model::{ModelConfig, ModelError};
use crate::train::TrainConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config is not valid JSON for the schema: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// AUC horizons in years.
    pub horizons: Vec<f64>,
    /// IBS integration limit; `None` means `min(5, last bin edge)`.
    pub tau: Option<f64>,
    pub bootstrap: usize,
    pub level: f64,
    /// Largest IPCW weight.
    pub weight_cap: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            horizons: vec![1.0, 3.0, 5.0],
            tau: None,
            bootstrap: 1000,
            level: 0.95,
            weight_cap: DEFAULT_WEIGHT_CAP,
        }
    }
}

impl EvalConfig {
    pub fn tau(&self, last_edge: f64) -> f64 {
        self.tau.unwrap_or(5.0f64.min(last_edge))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CvConfig {
    pub k: usize,
    pub repeats: usize,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self { k: 5, repeats: 3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    /// Cohort file; when absent, commands simulate from `simulate`.
    pub cohort: Option<PathBuf>,
    pub output: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            cohort: None,
            output: PathBuf::from("out"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Root of every derived seed: simulation, splits, initialization, training, bootstrap.
    pub seed: u64,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub cv: CvConfig,
    pub paths: PathsConfig,
    pub simulate: SimulationScenario,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.model.validate().map_err(|e| match e {
            ModelError::Config(m) => ConfigError::Invalid(format!("model: {m}")),
            other => ConfigError::Invalid(other.to_string()),
        })?;
        self.train
            .validate()
            .map_err(|m| ConfigError::Invalid(format!("train: {m}")))?;
        let last = self.model.bins.last_edge();
        let tau = self.eval.tau(last);
        let s = &self.simulate;
        let checks = [
            (
                self.eval.horizons.iter().all(|h| *h > 0.0 && h.is_finite()),
                "eval.horizons must be positive".to_string(),
            ),
            (tau > 0.0 && tau <= last, format!("eval.tau must lie in (0, {last}]")),
            (
                self.eval.bootstrap >= MIN_RESAMPLES,
                format!("eval.bootstrap must be at least {MIN_RESAMPLES}"),
            ),
            (
                self.eval.level > 0.0 && self.eval.level < 1.0,
                "eval.level must lie in (0, 1)".to_string(),
            ),
            (
                self.eval.weight_cap >= 1.0,
                "eval.weight_cap must be at least 1".to_string(),
            ),
            (self.cv.k >= 2, "cv.k must be at least 2".to_string()),
            (self.cv.repeats >= 1, "cv.repeats must be at least 1".to_string()),
            (s.n >= 1, "simulate.n must be at least 1".to_string()),
            (
                (0.0..1.0).contains(&s.censoring_rate),
                "simulate.censoring_rate must lie in [0, 1)".to_string(),
            ),
            (
                s.hazard_ratio > 0.0,
                "simulate.hazard_ratio must be positive".to_string(),
            ),
            (
                s.os_hazard > 0.0 && s.os_hazard < 1.0 && s.recurrence_hazard > 0.0 && s.recurrence_hazard < 1.0,
                "simulate hazards must lie in (0, 1)".to_string(),
            ),
            (s.signal.is_finite(), "simulate.signal must be finite".to_string()),
            (
                s.region_len >= 1 && s.clinical_len >= 1,
                "simulate feature lengths must be at least 1".to_string(),
            ),
            (
                (0.0..=1.0).contains(&s.remnant_missing),
                "simulate.remnant_missing must lie in [0, 1]".to_string(),
            ),
        ];
        match checks.into_iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(ConfigError::Invalid(msg)),
            None => Ok(()),
        }
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    RunConfig::from_json(&text)
}
