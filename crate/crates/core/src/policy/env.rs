use crate::control::{
    controller_step, make_controller_with_defaults, ControllerState, ControllerVariant, PidGains,
};
use crate::dynamics::{step_dynamics, JointState, Trajectory, TrajectoryRecorder};
use crate::error::{check_finite, Error, Result};
use crate::model::RobotModel;

use super::{reward, Policy};

#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub variant: ControllerVariant,
    /// Only used by `RosPid`; defaults to the model's PD gains with `k_i = 0`.
    pub gains: Option<PidGains>,
    /// Steps per episode.
    pub horizon: usize,
    pub dt: f64,
    /// Largest position-reference change per step (rad), reached at |action| = 1.
    pub action_scaling: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            variant: ControllerVariant::GymPd,
            gains: None,
            horizon: 150,
            dt: 1.0 / 60.0,
            action_scaling: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

/// Home-to-zero environment. Actions are per-joint position-reference deltas.
#[derive(Debug, Clone)]
pub struct Env {
    model: RobotModel,
    config: EnvConfig,
    state: JointState,
    ctrl: ControllerState,
    steps: usize,
    seed: u64,
}

impl Env {
    pub fn new(model: RobotModel, config: EnvConfig, seed: u64) -> Result<Self> {
        if config.horizon < 1 {
            return Err(Error::invariant("horizon", "must be >= 1"));
        }
        if !(config.action_scaling.is_finite() && config.action_scaling > 0.0) {
            return Err(Error::invariant(
                "action_scaling",
                format!("must be > 0, got {}", config.action_scaling),
            ));
        }
        if !(config.dt.is_finite() && config.dt > 0.0) {
            return Err(Error::invariant(
                "dt",
                format!("must be > 0, got {}", config.dt),
            ));
        }
        let ctrl = make_controller_with_defaults(config.variant, &model, config.gains.clone())?;
        let state = JointState::home(&model);
        Ok(Self {
            model,
            config,
            state,
            ctrl,
            steps: 0,
            seed,
        })
    }

    pub fn model(&self) -> &RobotModel {
        &self.model
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn state(&self) -> &JointState {
        &self.state
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dof(&self) -> usize {
        self.model.dof()
    }

    pub fn is_done(&self) -> bool {
        self.steps >= self.config.horizon
    }

    /// Same model and settings under another controller pipeline.
    pub fn with_variant(
        &self,
        variant: ControllerVariant,
        gains: Option<PidGains>,
    ) -> Result<Self> {
        let config = EnvConfig {
            variant,
            gains,
            ..self.config.clone()
        };
        Env::new(self.model.clone(), config, self.seed)
    }

    /// Back to home at rest. The start state does not depend on `seed`; it is
    /// recorded so episodes stay reproducible if randomised starts are added.
    pub fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.seed = seed;
        self.state = JointState::home(&self.model);
        self.ctrl = make_controller_with_defaults(
            self.config.variant,
            &self.model,
            self.config.gains.clone(),
        )
        .expect("gains validated in Env::new");
        self.steps = 0;
        self.observation()
    }

    /// Positions scaled to [-1, 1] by the joint limits, then velocities
    /// scaled by `qd_max`.
    pub fn observation(&self) -> Vec<f64> {
        let joints = self.model.joints();
        let q = joints
            .iter()
            .zip(&self.state.q)
            .map(|(j, &q)| ((q - j.q_min) - (j.q_max - q)) / (j.q_max - j.q_min));
        let qd = joints
            .iter()
            .zip(&self.state.qd)
            .map(|(j, &v)| v / j.qd_max);
        q.chain(qd).collect()
    }

    pub fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        if self.is_done() {
            return Err(Error::EpisodeDone);
        }
        Error::check_dim("action", self.dof(), action.len())?;
        check_finite("action", action)?;
        let target: Vec<f64> = self
            .model
            .joints()
            .iter()
            .zip(&self.state.q)
            .zip(action)
            .map(|((j, &q), &a)| {
                j.clamp_position(q + a.clamp(-1.0, 1.0) * self.config.action_scaling)
            })
            .collect();
        let (effort, ctrl) = controller_step(
            &self.ctrl,
            &target,
            &self.state,
            &self.model,
            self.config.dt,
        )?;
        self.state = step_dynamics(&self.state, &effort, &self.model, self.config.dt)?;
        self.ctrl = ctrl;
        self.steps += 1;
        Ok(StepOutcome {
            observation: self.observation(),
            reward: reward(&self.state.q)?,
            done: self.is_done(),
        })
    }
}

/// One full episode from home. Returns the trajectory (horizon + 1 samples)
/// and the episode return.
pub fn rollout(policy: &Policy, env: &Env, seed: u64) -> Result<(Trajectory, f64)> {
    Error::check_dim("policy dof", env.dof(), policy.dof)?;
    let mut env = env.clone();
    let mut obs = env.reset(seed);
    let mut rec = TrajectoryRecorder::new(env.config.dt, env.dof(), env.config.horizon + 1);
    rec.push(env.state.clone());
    let mut ret = 0.0;
    loop {
        let action = policy.act(&obs)?;
        let out = env.step(&action)?;
        rec.push(env.state.clone());
        ret += out.reward;
        obs = out.observation;
        if out.done {
            break;
        }
    }
    Ok((rec.finish(), ret))
}

/// Mean episode return over `episodes` resets seeded `seed, seed + 1, ...`.
pub fn evaluate_policy(policy: &Policy, env: &Env, episodes: usize, seed: u64) -> Result<f64> {
    if episodes < 1 {
        return Err(Error::invariant("episodes", "must be >= 1"));
    }
    let mut total = 0.0;
    for e in 0..episodes {
        let (_, ret) = rollout(policy, env, seed.wrapping_add(e as u64))?;
        total += ret;
    }
    Ok(total / episodes as f64)
}

/// Σ|q| at the end of one episode.
pub fn episode_end_abs_sum(policy: &Policy, env: &Env, seed: u64) -> Result<f64> {
    let (traj, _) = rollout(policy, env, seed)?;
    Ok(traj
        .last()
        .expect("non-empty")
        .q
        .iter()
        .map(|q| q.abs())
        .sum())
}
