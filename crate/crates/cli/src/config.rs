//! Experiment configuration: a flat TOML file, overridable from the command line.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{io_err, CliError, Result};
use crate::registry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: String,
    /// Terminal time `T`.
    pub horizon: f64,
    pub dt: f64,
    pub n_samples: usize,
    pub n_inner: usize,
    pub base_seed: u64,
    pub z_threshold: f64,
    pub output: PathBuf,
    pub format: OutputFormat,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: "E1".into(),
            horizon: 1.0,
            dt: 1.0 / 256.0,
            n_samples: 200_000,
            n_inner: 512,
            base_seed: 20240601,
            z_threshold: 4.0,
            output: PathBuf::from("results"),
            format: OutputFormat::Csv,
        }
    }
}

impl ExperimentConfig {
    pub fn for_experiment(id: &str) -> Self {
        Self {
            experiment: id.to_string(),
            ..Self::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_toml(&text)
    }

    /// Number of grid steps in `[0, T]`.
    pub fn n_steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if registry::find(&self.experiment).is_none() {
            return Err(CliError::UnknownExperiment(self.experiment.clone()));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(CliError::Config(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.dt > 0.0 && self.dt <= self.horizon) {
            return Err(CliError::Config(format!("dt must lie in (0, T], got {}", self.dt)));
        }
        let steps = (self.horizon / self.dt).round();
        if (steps * self.dt - self.horizon).abs() > 1e-12 {
            return Err(CliError::Config(format!(
                "dt = {} does not divide T = {}",
                self.dt, self.horizon
            )));
        }
        if self.n_samples < 2 || self.n_inner < 2 {
            return Err(CliError::Config(format!(
                "budgets must be at least 2 (n_samples = {}, n_inner = {})",
                self.n_samples, self.n_inner
            )));
        }
        if !(self.z_threshold > 0.0) {
            return Err(CliError::Config(format!("z_threshold must be positive, got {}", self.z_threshold)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        assert_eq!(c.n_steps(), 256);
    }

    #[test]
    fn partial_files_fill_in_defaults() {
        let c = ExperimentConfig::from_toml("experiment = \"E6\"\ndt = 0.0625\nformat = \"json\"\n").unwrap();
        assert_eq!(c.experiment, "E6");
        assert_eq!(c.format, OutputFormat::Json);
        assert_eq!(c.n_samples, 200_000);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(
            ExperimentConfig::from_toml("experiment = \"E1\"\nsamples = 10\n"),
            Err(CliError::Toml(_))
        ));
    }

    #[test]
    fn validation_errors() {
        let bad_dt = ExperimentConfig {
            dt: 0.3,
            ..Default::default()
        };
        assert!(matches!(bad_dt.validate(), Err(CliError::Config(_))));
        let bad_id = ExperimentConfig::for_experiment("E42");
        assert!(matches!(bad_id.validate(), Err(CliError::UnknownExperiment(_))));
        let bad_budget = ExperimentConfig {
            n_inner: 0,
            ..Default::default()
        };
        assert!(bad_budget.validate().is_err());
    }
}
