//! Home-to-zero policy learning: environment, squashed-affine policies, a
//! cross-entropy-method trainer, and cross-pipeline transfer evaluation.

mod cem;
mod env;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::control::{ControllerVariant, PidGains};
use crate::error::{check_finite, Error, Result};
use crate::gap::{accumulated_error, GapReport, SettleParams};
use crate::model::RobotModel;

pub use cem::{cem_train, HistoryRow, TrainConfig, TrainHistory};
pub use env::{episode_end_abs_sum, evaluate_policy, rollout, Env, EnvConfig, StepOutcome};

/// Per-step reward `−Σ|q_i|`. Zero only at the zero configuration.
pub fn reward(q: &[f64]) -> Result<f64> {
    check_finite("reward input", q)?;
    Ok(-q.iter().map(|v| v.abs()).sum::<f64>())
}

/// `action = tanh(weights · observation + bias)`.
///
/// The observation is `[q normalized by limits, qd normalized by qd_max]`,
/// so `weights` is `dof × 2·dof`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Policy {
    pub dof: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Policy {
    pub fn zeros(dof: usize) -> Self {
        Self {
            dof,
            weights: vec![0.0; 2 * dof * dof],
            bias: vec![0.0; dof],
        }
    }

    pub fn obs_dim(&self) -> usize {
        2 * self.dof
    }

    pub fn num_params(dof: usize) -> usize {
        2 * dof * dof + dof
    }

    /// Weights followed by bias.
    pub fn from_params(dof: usize, params: &[f64]) -> Result<Self> {
        Error::check_dim("policy parameters", Self::num_params(dof), params.len())?;
        let split = 2 * dof * dof;
        let policy = Self {
            dof,
            weights: params[..split].to_vec(),
            bias: params[split..].to_vec(),
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn params(&self) -> Vec<f64> {
        self.weights.iter().chain(&self.bias).copied().collect()
    }

    pub fn validate(&self) -> Result<()> {
        Error::check_dim(
            "policy weights",
            2 * self.dof * self.dof,
            self.weights.len(),
        )?;
        Error::check_dim("policy bias", self.dof, self.bias.len())?;
        check_finite("policy weights", &self.weights)?;
        check_finite("policy bias", &self.bias)
    }

    pub fn act(&self, observation: &[f64]) -> Result<Vec<f64>> {
        Error::check_dim("observation", self.obs_dim(), observation.len())?;
        Ok(self
            .weights
            .chunks_exact(self.obs_dim())
            .zip(&self.bias)
            .map(|(row, b)| {
                let z: f64 = row.iter().zip(observation).map(|(w, o)| w * o).sum::<f64>() + b;
                z.tanh()
            })
            .collect())
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("policy serializes");
        s.push('\n');
        s
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let policy: Policy =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("policy file: {e}")))?;
        policy.validate()?;
        Ok(policy)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json_str(&text)
    }
}

/// Rolls the same policy out from home under two pipelines and reports the
/// accumulated error between the resulting trajectories. Steady state is
/// judged against the zero configuration.
pub fn transfer_gap(
    policy: &Policy,
    model: &RobotModel,
    variant_a: (ControllerVariant, Option<PidGains>),
    variant_b: (ControllerVariant, Option<PidGains>),
    config: &EnvConfig,
) -> Result<GapReport> {
    Error::check_dim("policy dof", model.dof(), policy.dof)?;
    policy.validate()?;
    let env_for = |(variant, gains): (ControllerVariant, Option<PidGains>)| {
        let config = EnvConfig {
            variant,
            gains,
            ..config.clone()
        };
        Env::new(model.clone(), config, 0)
    };
    let (traj_a, _) = rollout(policy, &env_for(variant_a)?, 0)?;
    let (traj_b, _) = rollout(policy, &env_for(variant_b)?, 0)?;
    accumulated_error(
        &traj_a,
        &traj_b,
        &SettleParams::for_target(model.zero_configuration()?),
    )
}
