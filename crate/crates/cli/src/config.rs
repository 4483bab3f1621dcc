//! Run configuration files.
//!
//! Relative paths inside a config resolve against the config file's
//! directory, so a config and its model can move together.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use jointgap::gap::StepExperiment;
use jointgap::model::load_robot_model;
use jointgap::policy::{EnvConfig, TrainConfig};
use jointgap::{ControllerVariant, JointState, PidGains, RobotModel};

use crate::error::{CliError, CliResult};

pub const SEED_ENV: &str = "JOINTGAP_SEED";

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: PathBuf,
    #[serde(default = "default_variant")]
    pub variant: ControllerVariant,
    /// PID gains; only used by `ros-pid`.
    #[serde(default)]
    pub gains: Option<PidGains>,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_variant() -> ControllerVariant {
    ControllerVariant::GymPd
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    /// Step targets; the zero configuration when absent.
    pub targets: Option<Vec<f64>>,
    /// Starting positions at rest; home when absent.
    pub initial: Option<Vec<f64>>,
    pub duration: f64,
    /// Timestep; the model's default when absent.
    pub dt: Option<f64>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            targets: None,
            initial: None,
            duration: 10.0,
            dt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub iterations: usize,
    pub population: usize,
    pub elite_fraction: f64,
    pub initial_stddev: f64,
    pub stddev_floor: f64,
    pub extra_stddev: f64,
    pub episodes: usize,
    pub horizon: usize,
    pub action_scaling: f64,
    pub threads: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        let e = EnvConfig::default();
        Self {
            iterations: t.iterations,
            population: t.population,
            elite_fraction: t.elite_fraction,
            initial_stddev: t.initial_stddev,
            stddev_floor: t.stddev_floor,
            extra_stddev: t.extra_stddev,
            episodes: t.episodes,
            horizon: e.horizon,
            action_scaling: e.action_scaling,
            threads: t.threads,
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> CliResult<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config: RunConfig = serde_json::from_str(&text).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(config)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn model_path(&self) -> PathBuf {
        self.resolve(&self.model)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    pub fn load_model(&self) -> CliResult<RobotModel> {
        Ok(load_robot_model(self.model_path())?)
    }

    /// Gains for `variant`: the configured gains for `ros-pid`, none otherwise.
    pub fn gains_for(&self, variant: ControllerVariant) -> Option<PidGains> {
        match variant {
            ControllerVariant::RosPid => self.gains.clone(),
            _ => None,
        }
    }

    pub fn step_experiment(&self, model: &RobotModel) -> CliResult<StepExperiment> {
        let e = &self.experiment;
        let targets = match &e.targets {
            Some(t) => t.clone(),
            None => model.zero_configuration()?,
        };
        let mut experiment =
            StepExperiment::new(targets, e.duration, e.dt.unwrap_or(model.dt_default()));
        experiment.initial = e.initial.clone().map(JointState::at_rest);
        Ok(experiment)
    }

    pub fn env_config(&self, variant: ControllerVariant) -> EnvConfig {
        EnvConfig {
            variant,
            gains: self.gains_for(variant),
            horizon: self.train.horizon,
            dt: self.experiment.dt.unwrap_or(EnvConfig::default().dt),
            action_scaling: self.train.action_scaling,
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            iterations: t.iterations,
            population: t.population,
            elite_fraction: t.elite_fraction,
            initial_stddev: t.initial_stddev,
            stddev_floor: t.stddev_floor,
            extra_stddev: t.extra_stddev,
            episodes: t.episodes,
            seed,
            threads: t.threads,
        }
    }
}

/// Flag, then config, then `JOINTGAP_SEED`, then 0.
pub fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> CliResult<u64> {
    if let Some(seed) = flag.or(config) {
        return Ok(seed);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| {
            CliError::Usage(format!("{SEED_ENV} must be an unsigned integer, got `{v}`"))
        }),
        Err(_) => Ok(0),
    }
}
