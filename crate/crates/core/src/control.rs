//! Joint-space controller pipelines.
//!
//! All three pipelines share the same skeleton: clamp the position reference
//! into the joint limits, compute a raw effort, then saturate it to
//! `±effort_max`. They differ in two places:
//!
//! - [`ControllerVariant::GymPd`] uses a PD law with `k_p = stiffness`,
//!   `k_d = damping`, and caps the effort so the next velocity never exceeds
//!   `qd_max` (one-step lookahead through the plant update).
//! - [`ControllerVariant::SimPd`] is the same PD law *without* the velocity
//!   cap, so joint velocity limits can be exceeded.
//! - [`ControllerVariant::RosPid`] adds an anti-windup integral term and keeps
//!   the velocity cap. With `k_i = 0` it is bit-identical to `GymPd`.
//!
//! The derivative term acts on measured velocity (velocity reference 0).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::{effort_for_velocity, predict_velocity, JointState};
use crate::error::{check_finite, Error, Result};
use crate::model::{JointSpec, RobotModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerVariant {
    GymPd,
    SimPd,
    RosPid,
}

impl ControllerVariant {
    pub const ALL: [ControllerVariant; 3] = [Self::GymPd, Self::SimPd, Self::RosPid];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::GymPd => "gym-pd",
            Self::SimPd => "sim-pd",
            Self::RosPid => "ros-pid",
        }
    }

    /// Whether the pipeline caps effort to respect joint velocity limits.
    pub fn enforces_velocity_limits(self) -> bool {
        !matches!(self, Self::SimPd)
    }
}

impl fmt::Display for ControllerVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ControllerVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown controller variant `{s}` (expected gym-pd, sim-pd or ros-pid)"
                ))
            })
    }
}

/// Gains of a single joint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointGains {
    pub k_p: f64,
    pub k_i: f64,
    pub k_d: f64,
}

/// Per-joint PID gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidGains {
    pub k_p: Vec<f64>,
    pub k_i: Vec<f64>,
    pub k_d: Vec<f64>,
}

impl PidGains {
    /// `k_p = stiffness`, `k_d = damping`, `k_i = 0` for every joint.
    pub fn from_model(model: &RobotModel) -> Self {
        Self {
            k_p: model.joints().iter().map(|j| j.stiffness).collect(),
            k_i: vec![0.0; model.dof()],
            k_d: model.joints().iter().map(|j| j.damping).collect(),
        }
    }

    pub fn at(&self, joint: usize) -> JointGains {
        JointGains {
            k_p: self.k_p[joint],
            k_i: self.k_i[joint],
            k_d: self.k_d[joint],
        }
    }

    pub fn validate(&self, dof: usize) -> Result<()> {
        for (field, gains) in [("k_p", &self.k_p), ("k_i", &self.k_i), ("k_d", &self.k_d)] {
            Error::check_dim(field, dof, gains.len())?;
            if let Some(i) = gains.iter().position(|g| !(g.is_finite() && *g >= 0.0)) {
                return Err(Error::Invariant {
                    field,
                    joint: Some(i + 1),
                    name: None,
                    message: format!("gain must be finite and >= 0, got {}", gains[i]),
                });
            }
        }
        Ok(())
    }
}

/// Mutable controller state. Value type: every step returns a new state.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    variant: ControllerVariant,
    gains: PidGains,
    /// Accumulated position error per joint (rad·s). Always zero for PD variants.
    pub integral: Vec<f64>,
    /// Last (clamped) position reference per joint.
    pub last_target: Vec<f64>,
}

impl ControllerState {
    pub fn variant(&self) -> ControllerVariant {
        self.variant
    }

    pub fn gains(&self) -> &PidGains {
        &self.gains
    }
}

/// Builds a zeroed controller whose reference starts at the model's home pose.
///
/// `gains` must be given for [`ControllerVariant::RosPid`] and only for it;
/// the PD variants read their gains from the model.
pub fn make_controller(
    variant: ControllerVariant,
    model: &RobotModel,
    gains: Option<PidGains>,
) -> Result<ControllerState> {
    let gains = match (variant, gains) {
        (ControllerVariant::RosPid, Some(g)) => {
            g.validate(model.dof())?;
            g
        }
        (ControllerVariant::RosPid, None) => {
            return Err(Error::Config(
                "ros-pid controller requires PID gains".into(),
            ))
        }
        (_, None) => PidGains::from_model(model),
        (v, Some(_)) => return Err(Error::Config(format!(
            "{v} takes its gains from the model; explicit PID gains are only accepted for ros-pid"
        ))),
    };
    Ok(ControllerState {
        variant,
        gains,
        integral: vec![0.0; model.dof()],
        last_target: model.home().to_vec(),
    })
}

/// Like [`make_controller`], filling in default gains for `RosPid` when absent.
pub fn make_controller_with_defaults(
    variant: ControllerVariant,
    model: &RobotModel,
    gains: Option<PidGains>,
) -> Result<ControllerState> {
    let gains = match variant {
        ControllerVariant::RosPid => Some(gains.unwrap_or_else(|| PidGains::from_model(model))),
        _ => gains,
    };
    make_controller(variant, model, gains)
}

/// Raw (unsaturated) PD effort `k_p·q_err + k_d·qd_err`.
pub fn pd_effort(q_err: f64, qd_err: f64, k_p: f64, k_d: f64) -> Result<f64> {
    check_finite("pd input", &[q_err, qd_err, k_p, k_d])?;
    Ok(k_p * q_err + k_d * qd_err)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidOutput {
    pub effort: f64,
    pub integral: f64,
}

/// Raw PID effort with the integral clamped to `±effort_max / k_i`.
///
/// With `k_i = 0` the integral stays at its input value and the result is
/// exactly [`pd_effort`].
pub fn pid_effort(
    q_err: f64,
    qd_err: f64,
    integral: f64,
    gains: JointGains,
    dt: f64,
    effort_max: f64,
) -> Result<PidOutput> {
    check_finite("pid input", &[q_err, qd_err, integral, dt, effort_max])?;
    if dt <= 0.0 {
        return Err(Error::invariant("dt", format!("must be > 0, got {dt}")));
    }
    let mut effort = pd_effort(q_err, qd_err, gains.k_p, gains.k_d)?;
    let mut integral = integral;
    if gains.k_i > 0.0 {
        let bound = effort_max / gains.k_i;
        integral = (integral + q_err * dt).clamp(-bound, bound);
        effort += gains.k_i * integral;
    }
    Ok(PidOutput { effort, integral })
}

/// Saturates `effort` and, for velocity-enforcing variants, reduces it so that
/// the predicted next velocity lands exactly on the limit.
fn finalize_effort(
    variant: ControllerVariant,
    joint: &JointSpec,
    qd: f64,
    raw: f64,
    dt: f64,
) -> f64 {
    let effort = raw.clamp(-joint.effort_max, joint.effort_max);
    if !variant.enforces_velocity_limits() {
        return effort;
    }
    let qd_next = predict_velocity(joint, qd, effort, dt);
    let limit = if qd_next > joint.qd_max {
        joint.qd_max
    } else if qd_next < -joint.qd_max {
        -joint.qd_max
    } else {
        return effort;
    };
    let mut capped =
        effort_for_velocity(joint, qd, limit, dt).clamp(-joint.effort_max, joint.effort_max);
    // rounding can leave the prediction one ulp outside the limit
    for _ in 0..64 {
        let v = predict_velocity(joint, qd, capped, dt);
        if v > joint.qd_max {
            capped = capped.next_down();
        } else if v < -joint.qd_max {
            capped = capped.next_up();
        } else {
            break;
        }
    }
    capped.clamp(-joint.effort_max, joint.effort_max)
}

fn check_step_inputs(
    ctrl: &ControllerState,
    command: &[f64],
    measured: &JointState,
    model: &RobotModel,
    dt: f64,
) -> Result<()> {
    Error::check_dim("command", model.dof(), command.len())?;
    Error::check_dim("controller state", model.dof(), ctrl.integral.len())?;
    check_finite("command", command)?;
    measured.check_against(model)?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invariant("dt", format!("must be > 0, got {dt}")));
    }
    Ok(())
}

/// One position-control step: returns the applied effort per joint and the
/// successor controller state.
pub fn controller_step(
    ctrl: &ControllerState,
    target_q: &[f64],
    measured: &JointState,
    model: &RobotModel,
    dt: f64,
) -> Result<(Vec<f64>, ControllerState)> {
    check_step_inputs(ctrl, target_q, measured, model, dt)?;
    let mut next = ctrl.clone();
    let mut efforts = Vec::with_capacity(model.dof());
    for (i, joint) in model.joints().iter().enumerate() {
        let target = joint.clamp_position(target_q[i]);
        let q_err = target - measured.q[i];
        let qd_err = -measured.qd[i];
        let gains = ctrl.gains.at(i);
        let raw = match ctrl.variant {
            ControllerVariant::GymPd | ControllerVariant::SimPd => {
                pd_effort(q_err, qd_err, gains.k_p, gains.k_d)?
            }
            ControllerVariant::RosPid => {
                let out = pid_effort(q_err, qd_err, ctrl.integral[i], gains, dt, joint.effort_max)?;
                next.integral[i] = out.integral;
                out.effort
            }
        };
        next.last_target[i] = target;
        efforts.push(finalize_effort(
            ctrl.variant,
            joint,
            measured.qd[i],
            raw,
            dt,
        ));
    }
    Ok((efforts, next))
}

/// Velocity-mode step: `k_d·(qd_target − qd)` with the proportional term off.
pub fn velocity_command_step(
    ctrl: &ControllerState,
    target_qd: &[f64],
    measured: &JointState,
    model: &RobotModel,
    dt: f64,
) -> Result<Vec<f64>> {
    check_step_inputs(ctrl, target_qd, measured, model, dt)?;
    model
        .joints()
        .iter()
        .enumerate()
        .map(|(i, joint)| {
            let raw = pd_effort(0.0, target_qd[i] - measured.qd[i], 0.0, ctrl.gains.k_d[i])?;
            Ok(finalize_effort(
                ctrl.variant,
                joint,
                measured.qd[i],
                raw,
                dt,
            ))
        })
        .collect()
}

/// Effort-mode step: the commanded effort passes through saturation and the
/// variant's velocity enforcement unchanged otherwise.
pub fn effort_command_step(
    ctrl: &ControllerState,
    effort: &[f64],
    measured: &JointState,
    model: &RobotModel,
    dt: f64,
) -> Result<Vec<f64>> {
    check_step_inputs(ctrl, effort, measured, model, dt)?;
    Ok(model
        .joints()
        .iter()
        .enumerate()
        .map(|(i, joint)| finalize_effort(ctrl.variant, joint, measured.qd[i], effort[i], dt))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::step_dynamics;
    use crate::model::tests::joint;
    use proptest::prelude::*;

    const DT: f64 = 1.0 / 60.0;

    fn stiff_joint_model() -> RobotModel {
        let mut j = joint("j", -2.0, 2.0);
        j.stiffness = 1.0e4;
        j.damping = 10.0;
        j.effort_max = 1.0e3;
        j.qd_max = 1.0;
        RobotModel::new(vec![j], vec![-1.0], DT).unwrap()
    }

    #[test]
    fn pd_effort_examples() {
        assert_eq!(pd_effort(0.0, 0.0, 5.0, 3.0).unwrap(), 0.0);
        assert_eq!(pd_effort(1.0, 0.0, 1.0, 0.0).unwrap(), 1.0);
        assert!((pd_effort(0.5, -0.2, 100.0, 10.0).unwrap() - 48.0).abs() < 1e-12);
        assert!(pd_effort(f64::NAN, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn pid_effort_examples() {
        let pd = pd_effort(0.3, -0.1, 7.0, 2.0).unwrap();
        let g = JointGains {
            k_p: 7.0,
            k_i: 0.0,
            k_d: 2.0,
        };
        let out = pid_effort(0.3, -0.1, 0.0, g, DT, 10.0).unwrap();
        assert_eq!(out.effort.to_bits(), pd.to_bits());
        assert_eq!(out.integral, 0.0);

        let g = JointGains {
            k_p: 0.0,
            k_i: 1.0,
            k_d: 0.0,
        };
        let out = pid_effort(0.5, 0.0, 0.0, g, 0.1, 10.0).unwrap();
        assert!((out.effort - 0.05).abs() < 1e-15);
        assert!((out.integral - 0.05).abs() < 1e-15);
    }

    #[test]
    fn pid_integral_saturates() {
        let g = JointGains {
            k_p: 0.0,
            k_i: 4.0,
            k_d: 0.0,
        };
        let mut integral = 0.0;
        for _ in 0..10_000 {
            let out = pid_effort(1.0, 0.0, integral, g, DT, 20.0).unwrap();
            integral = out.integral;
            assert!(integral <= 20.0 / 4.0);
            assert!((g.k_i * integral).abs() <= 20.0);
        }
        assert_eq!(integral, 5.0);
    }

    #[test]
    fn make_controller_examples() {
        let model = RobotModel::example_arm();
        let gym = make_controller(ControllerVariant::GymPd, &model, None).unwrap();
        assert!(gym.integral.iter().all(|&v| v == 0.0));
        assert_eq!(gym.last_target, model.home());

        assert!(make_controller(ControllerVariant::RosPid, &model, None).is_err());

        let mut gains = PidGains::from_model(&model);
        gains.k_i = vec![0.1; 7];
        let ros = make_controller(ControllerVariant::RosPid, &model, Some(gains.clone())).unwrap();
        assert!(ros.integral.iter().all(|&v| v == 0.0));
        assert_eq!(ros.gains(), &gains);
    }

    #[test]
    fn at_reference_gives_zero_effort() {
        let model = RobotModel::example_arm();
        let measured = JointState::home(&model);
        for variant in ControllerVariant::ALL {
            let ctrl = make_controller_with_defaults(variant, &model, None).unwrap();
            let (effort, _) = controller_step(&ctrl, model.home(), &measured, &model, DT).unwrap();
            assert!(effort.iter().all(|&e| e == 0.0), "{variant}: {effort:?}");
        }
    }

    /// Independent route to the capping effort: bisection on the plant update.
    fn bisect_capping_effort(j: &JointSpec, qd: f64, dt: f64) -> f64 {
        let (mut lo, mut hi) = (-j.effort_max, j.effort_max);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let v = qd + dt * (mid - j.viscous_friction * qd) / j.inertia;
            if v > j.qd_max {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn sim_violates_while_gym_lands_on_limit() {
        let model = stiff_joint_model();
        let measured = JointState::home(&model);
        let target = [1.5];
        let j = model.joint(0);

        let sim = make_controller(ControllerVariant::SimPd, &model, None).unwrap();
        let (e, _) = controller_step(&sim, &target, &measured, &model, DT).unwrap();
        let next = step_dynamics(&measured, &e, &model, DT).unwrap();
        assert!(next.qd[0].abs() > j.qd_max, "{}", next.qd[0]);

        let gym = make_controller(ControllerVariant::GymPd, &model, None).unwrap();
        let (e, _) = controller_step(&gym, &target, &measured, &model, DT).unwrap();
        let next = step_dynamics(&measured, &e, &model, DT).unwrap();
        assert!((next.qd[0].abs() - j.qd_max).abs() < 1e-9, "{}", next.qd[0]);
        assert!((e[0] - bisect_capping_effort(j, 0.0, DT)).abs() < 1e-9);
    }

    #[test]
    fn target_is_clamped_into_limits() {
        let model = RobotModel::example_arm();
        let ctrl = make_controller(ControllerVariant::GymPd, &model, None).unwrap();
        let mut target = model.home().to_vec();
        target[0] = 100.0;
        let (_, next) =
            controller_step(&ctrl, &target, &JointState::home(&model), &model, DT).unwrap();
        assert_eq!(next.last_target[0], model.joint(0).q_max);
    }

    #[test]
    fn step_rejects_bad_inputs() {
        let model = RobotModel::example_arm();
        let ctrl = make_controller(ControllerVariant::GymPd, &model, None).unwrap();
        let m = JointState::home(&model);
        assert!(matches!(
            controller_step(&ctrl, &[0.0; 2], &m, &model, DT),
            Err(Error::Dimension { .. })
        ));
        let mut t = model.home().to_vec();
        t[1] = f64::INFINITY;
        assert!(controller_step(&ctrl, &t, &m, &model, DT).is_err());
    }

    #[test]
    fn velocity_and_effort_modes_share_limits() {
        let model = RobotModel::example_arm();
        let m = JointState::home(&model);
        let gym = make_controller(ControllerVariant::GymPd, &model, None).unwrap();
        let sim = make_controller(ControllerVariant::SimPd, &model, None).unwrap();

        let e = effort_command_step(&sim, &[500.0; 7], &m, &model, DT).unwrap();
        for (j, &v) in model.joints().iter().zip(&e) {
            assert_eq!(v, j.effort_max);
        }
        let e = effort_command_step(&gym, &[500.0; 7], &m, &model, DT).unwrap();
        let next = step_dynamics(&m, &e, &model, DT).unwrap();
        for (j, &qd) in model.joints().iter().zip(&next.qd) {
            assert!((qd - j.qd_max).abs() < 1e-9);
        }

        let e = velocity_command_step(&gym, &[0.1; 7], &m, &model, DT).unwrap();
        for (j, &v) in model.joints().iter().zip(&e) {
            assert!((v - j.damping * 0.1).abs() < 1e-12);
        }
    }

    /// V = ½k_p·e² + ½I·qd² for a constant in-range target with no
    /// saturation or velocity capping active.
    #[test]
    fn gym_closed_loop_lyapunov_non_increasing() {
        let model = RobotModel::example_arm();
        let ctrl0 = make_controller(ControllerVariant::GymPd, &model, None).unwrap();
        let target: Vec<f64> = model.home().iter().map(|h| h + 0.01).collect();
        let mut ctrl = ctrl0;
        let mut s = JointState::home(&model);
        let lyapunov = |s: &JointState| -> Vec<f64> {
            model
                .joints()
                .iter()
                .enumerate()
                .map(|(i, j)| {
                    let e = s.q[i] - target[i];
                    0.5 * j.stiffness * e * e + 0.5 * j.inertia * s.qd[i] * s.qd[i]
                })
                .collect()
        };
        let mut v = lyapunov(&s);
        for _ in 0..600 {
            let (effort, next) = controller_step(&ctrl, &target, &s, &model, DT).unwrap();
            for (j, &e) in model.joints().iter().zip(&effort) {
                assert!(e.abs() < j.effort_max);
            }
            ctrl = next;
            s = step_dynamics(&s, &effort, &model, DT).unwrap();
            for (j, &qd) in model.joints().iter().zip(&s.qd) {
                assert!(qd.abs() < j.qd_max);
            }
            let v_next = lyapunov(&s);
            // floor covers roundoff in q - target once converged
            for (a, b) in v.iter().zip(&v_next) {
                assert!(*b <= a + 1e-24, "{b} > {a}");
            }
            v = v_next;
        }
    }

    /// Settle time (1e-3 band) of the example arm for the targets below; the
    /// slowest, q_max - 0.05, measured 3.28 s.
    const EXAMPLE_SETTLE_TIME: f64 = 3.5;

    #[test]
    fn gym_reaches_and_holds_constant_targets() {
        let model = RobotModel::example_arm();
        let targets = [
            model.zero_configuration().unwrap(),
            model
                .joints()
                .iter()
                .map(|j| 0.5 * (j.q_min + j.q_max))
                .collect(),
            model.joints().iter().map(|j| j.q_max - 0.05).collect(),
        ];
        for target in targets {
            let mut ctrl = make_controller(ControllerVariant::GymPd, &model, None).unwrap();
            let mut s = JointState::home(&model);
            for k in 1..=600 {
                let (effort, next) = controller_step(&ctrl, &target, &s, &model, DT).unwrap();
                ctrl = next;
                s = step_dynamics(&s, &effort, &model, DT).unwrap();
                if k as f64 * DT >= EXAMPLE_SETTLE_TIME {
                    for (q, t) in s.q.iter().zip(&target) {
                        assert!((q - t).abs() < 1e-3, "t={} q={q} target={t}", k as f64 * DT);
                    }
                }
            }
        }
    }

    fn run(
        variant: ControllerVariant,
        gains: Option<PidGains>,
        model: &RobotModel,
        targets: &[Vec<f64>],
        hold: usize,
    ) -> Vec<JointState> {
        let mut ctrl = make_controller(variant, model, gains).unwrap();
        let mut s = JointState::home(model);
        let mut out = vec![s.clone()];
        for target in targets {
            for _ in 0..hold {
                let (effort, next) = controller_step(&ctrl, target, &s, model, DT).unwrap();
                for (j, &e) in model.joints().iter().zip(&effort) {
                    assert!(e.abs() <= j.effort_max);
                }
                ctrl = next;
                s = step_dynamics(&s, &effort, model, DT).unwrap();
                out.push(s.clone());
            }
        }
        out
    }

    fn arb_targets(model: &RobotModel) -> impl Strategy<Value = Vec<Vec<f64>>> {
        let joints = model.joints().to_vec();
        prop::collection::vec(
            joints
                .into_iter()
                .map(|j| (j.q_min - 0.5)..(j.q_max + 0.5))
                .collect::<Vec<_>>(),
            1..5,
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn enforcing_variants_respect_velocity_limits(
            targets in arb_targets(&RobotModel::example_arm()),
            ki in 0.0..50.0f64,
        ) {
            let model = RobotModel::example_arm();
            let mut gains = PidGains::from_model(&model);
            gains.k_i = vec![ki; 7];
            for (variant, g) in [(ControllerVariant::GymPd, None), (ControllerVariant::RosPid, Some(gains))] {
                for s in run(variant, g, &model, &targets, 90) {
                    for (j, &qd) in model.joints().iter().zip(&s.qd) {
                        prop_assert!(qd.abs() <= j.qd_max + 1e-9);
                    }
                }
            }
        }

        #[test]
        fn sim_pd_efforts_stay_saturated(targets in arb_targets(&RobotModel::example_arm())) {
            // effort bounds are asserted inside `run`
            run(ControllerVariant::SimPd, None, &RobotModel::example_arm(), &targets, 60);
        }

        #[test]
        fn ros_pid_without_integral_matches_gym_bitwise(
            targets in arb_targets(&RobotModel::example_arm()),
        ) {
            let model = RobotModel::example_arm();
            let gym = run(ControllerVariant::GymPd, None, &model, &targets, 60);
            let ros = run(ControllerVariant::RosPid, Some(PidGains::from_model(&model)), &model, &targets, 60);
            prop_assert_eq!(gym.len(), ros.len());
            for (a, b) in gym.iter().zip(&ros) {
                for k in 0..7 {
                    prop_assert_eq!(a.q[k].to_bits(), b.q[k].to_bits());
                    prop_assert_eq!(a.qd[k].to_bits(), b.qd[k].to_bits());
                }
            }
        }
    }

    #[test]
    fn sim_pd_violates_on_example_model() {
        let model = RobotModel::example_arm();
        let target = model.zero_configuration().unwrap();
        let traj = run(ControllerVariant::SimPd, None, &model, &[target], 300);
        let violated = traj.iter().any(|s| {
            model
                .joints()
                .iter()
                .zip(&s.qd)
                .any(|(j, &qd)| qd.abs() > j.qd_max)
        });
        assert!(violated);
    }
}
