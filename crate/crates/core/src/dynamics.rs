//! Decoupled joint plant `I·q̈ = τ − b·q̇`, advanced with semi-implicit Euler.
//!
//! Velocity is updated first from the applied effort, then position from the
//! new velocity. Positions are hard-stopped at the joint limits: a clamped
//! joint has its velocity zeroed.

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Error, Result};
use crate::model::{JointSpec, RobotModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointState {
    /// Joint positions (rad).
    pub q: Vec<f64>,
    /// Joint velocities (rad/s).
    pub qd: Vec<f64>,
}

impl JointState {
    pub fn new(q: Vec<f64>, qd: Vec<f64>) -> Result<Self> {
        Error::check_dim("joint state velocities", q.len(), qd.len())?;
        check_finite("joint state", &q)?;
        check_finite("joint state", &qd)?;
        Ok(Self { q, qd })
    }

    pub fn at_rest(q: Vec<f64>) -> Self {
        let qd = vec![0.0; q.len()];
        Self { q, qd }
    }

    /// Home pose with zero velocity.
    pub fn home(model: &RobotModel) -> Self {
        Self::at_rest(model.home().to_vec())
    }

    pub fn dof(&self) -> usize {
        self.q.len()
    }

    pub(crate) fn check_against(&self, model: &RobotModel) -> Result<()> {
        Error::check_dim("joint state", model.dof(), self.q.len())?;
        Error::check_dim("joint state", model.dof(), self.qd.len())?;
        check_finite("joint state", &self.q)?;
        check_finite("joint state", &self.qd)
    }
}

/// Velocity after one plant step under `effort`, before any position clamp.
#[inline]
pub fn predict_velocity(joint: &JointSpec, qd: f64, effort: f64, dt: f64) -> f64 {
    qd + dt * (effort - joint.viscous_friction * qd) / joint.inertia
}

/// The effort that makes [`predict_velocity`] land exactly on `qd_target`.
#[inline]
pub fn effort_for_velocity(joint: &JointSpec, qd: f64, qd_target: f64, dt: f64) -> f64 {
    joint.inertia * (qd_target - qd) / dt + joint.viscous_friction * qd
}

pub fn step_dynamics(
    state: &JointState,
    effort: &[f64],
    model: &RobotModel,
    dt: f64,
) -> Result<JointState> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invariant("dt", format!("must be > 0, got {dt}")));
    }
    Error::check_dim("effort", model.dof(), effort.len())?;
    check_finite("effort", effort)?;
    state.check_against(model)?;

    let mut next = JointState {
        q: Vec::with_capacity(model.dof()),
        qd: Vec::with_capacity(model.dof()),
    };
    for (i, joint) in model.joints().iter().enumerate() {
        let qd = predict_velocity(joint, state.qd[i], effort[i], dt);
        let q = state.q[i] + dt * qd;
        if q > joint.q_max || q < joint.q_min {
            next.q.push(joint.clamp_position(q));
            next.qd.push(0.0);
        } else {
            next.q.push(q);
            next.qd.push(qd);
        }
    }
    Ok(next)
}

/// Timestamped joint states, strictly increasing in time.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    t: Vec<f64>,
    samples: Vec<JointState>,
    dof: usize,
}

impl Trajectory {
    pub fn new(t: Vec<f64>, samples: Vec<JointState>, dof: usize) -> Result<Self> {
        Error::check_dim("trajectory samples", t.len(), samples.len())?;
        check_finite("trajectory time", &t)?;
        for (k, s) in samples.iter().enumerate() {
            if s.q.len() != dof || s.qd.len() != dof {
                return Err(Error::invariant(
                    "trajectory",
                    format!("sample {k} has {} joints, expected {dof}", s.q.len()),
                ));
            }
            check_finite("trajectory sample", &s.q)?;
            check_finite("trajectory sample", &s.qd)?;
        }
        if let Some(k) = t.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::invariant(
                "trajectory",
                format!("time not strictly increasing at sample {}", k + 1),
            ));
        }
        Ok(Self { t, samples, dof })
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn samples(&self) -> &[JointState] {
        &self.samples
    }

    pub fn dof(&self) -> usize {
        self.dof
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn start_time(&self) -> f64 {
        self.t[0]
    }

    pub fn end_time(&self) -> f64 {
        self.t[self.t.len() - 1]
    }

    pub fn last(&self) -> Option<&JointState> {
        self.samples.last()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &JointState)> {
        self.t.iter().copied().zip(&self.samples)
    }

    /// Column of positions for one DOF.
    pub fn positions(&self, dof: usize) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(move |s| s.q[dof])
    }
}

/// Accumulates samples for a trajectory whose timestamps are `k·dt`.
#[derive(Debug)]
pub(crate) struct TrajectoryRecorder {
    dt: f64,
    t: Vec<f64>,
    samples: Vec<JointState>,
    dof: usize,
}

impl TrajectoryRecorder {
    pub(crate) fn new(dt: f64, dof: usize, capacity: usize) -> Self {
        Self {
            dt,
            t: Vec::with_capacity(capacity),
            samples: Vec::with_capacity(capacity),
            dof,
        }
    }

    pub(crate) fn push(&mut self, state: JointState) {
        self.t.push(self.t.len() as f64 * self.dt);
        self.samples.push(state);
    }

    pub(crate) fn finish(self) -> Trajectory {
        Trajectory {
            t: self.t,
            samples: self.samples,
            dof: self.dof,
        }
    }
}
