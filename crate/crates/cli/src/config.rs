//! Experiment configuration: a single JSON document wrapping the session
//! parameters plus subcommand-specific options. Command-line flags override
//! file values.

use std::path::Path;

use cvqkd_core::protocol::SessionConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Threshold grid for the `sweep` subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl SweepGrid {
    pub fn points(&self) -> Result<Vec<f64>, CliError> {
        if !(self.start.is_finite() && self.stop.is_finite() && self.step.is_finite())
            || self.step <= 0.0
            || self.stop < self.start
            || self.start < 0.0
        {
            return Err(CliError::config(format!(
                "invalid sweep grid: start {}, stop {}, step {}",
                self.start, self.stop, self.step
            )));
        }
        let n = ((self.stop - self.start) / self.step).round() as usize;
        let points: Vec<f64> = (0..=n)
            .map(|i| self.start + self.step * i as f64)
            .filter(|x| *x <= self.stop + self.step * 1e-9)
            .collect();
        if points.is_empty() {
            return Err(CliError::config("sweep grid is empty"));
        }
        Ok(points)
    }
}

/// Options for the `detect` subcommand.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectOptions {
    /// When true, a detection alarm terminates with exit code 3.
    #[serde(default)]
    pub gate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub session: SessionConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepGrid>,
    #[serde(default)]
    pub detect: DetectOptions,
}

/// Flag overrides applied after the file is parsed.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub pulses: Option<u64>,
    pub alpha: Option<f64>,
}

impl ExperimentConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::config(format!("cannot read config {}: {e}", path.display()))
        })?;
        let mut config: ExperimentConfig = serde_json::from_str(&text).map_err(|e| {
            CliError::config(format!("cannot parse config {}: {e}", path.display()))
        })?;
        if let Some(seed) = overrides.seed {
            config.session.seed = seed;
        }
        if let Some(pulses) = overrides.pulses {
            config.session.n_pulses = pulses;
        }
        if let Some(alpha) = overrides.alpha {
            config.session.detection_alpha = alpha;
        }
        config
            .session
            .validate()
            .map_err(|e| CliError::config(format!("invalid session config: {e}")))?;
        Ok(config)
    }
}
