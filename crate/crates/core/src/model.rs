//! Robot description: per-joint limits, gains and inertial parameters.
//!
//! The plant is a set of decoupled revolute joints. DOF indices are 0-based
//! internally and 1-based in every human-facing message and report.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const EXAMPLE_ARM_JSON: &str = include_str!("../../../configs/models/arm7_example.json");
const TOY_1DOF_JSON: &str = include_str!("../../../configs/models/toy_1dof.json");

/// One actuated joint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    pub name: String,
    /// Position lower limit (rad).
    pub q_min: f64,
    /// Position upper limit (rad).
    pub q_max: f64,
    /// Velocity limit magnitude (rad/s).
    pub qd_max: f64,
    /// Effort limit magnitude (N·m).
    pub effort_max: f64,
    /// PD proportional gain k_p (N·m/rad).
    pub stiffness: f64,
    /// PD derivative gain k_d (N·m·s/rad).
    pub damping: f64,
    /// Effective joint inertia (kg·m²).
    pub inertia: f64,
    /// Plant viscous damping b (N·m·s/rad).
    pub viscous_friction: f64,
}

impl JointSpec {
    pub fn clamp_position(&self, q: f64) -> f64 {
        q.clamp(self.q_min, self.q_max)
    }

    pub fn contains(&self, q: f64) -> bool {
        q >= self.q_min && q <= self.q_max
    }

    fn validate(&self, index: usize) -> Result<()> {
        let err = |field, msg: String| Error::joint_invariant(field, index, &self.name, msg);
        let fields = [
            ("q_min", self.q_min),
            ("q_max", self.q_max),
            ("qd_max", self.qd_max),
            ("effort_max", self.effort_max),
            ("stiffness", self.stiffness),
            ("damping", self.damping),
            ("inertia", self.inertia),
            ("viscous_friction", self.viscous_friction),
        ];
        for (field, value) in fields {
            if !value.is_finite() {
                return Err(err(field, format!("{value} is not finite")));
            }
        }
        if self.q_min >= self.q_max {
            return Err(err(
                "q_min",
                format!(
                    "q_min ({}) must be below q_max ({})",
                    self.q_min, self.q_max
                ),
            ));
        }
        for (field, value) in [
            ("qd_max", self.qd_max),
            ("effort_max", self.effort_max),
            ("inertia", self.inertia),
        ] {
            if value <= 0.0 {
                return Err(err(field, format!("must be > 0, got {value}")));
            }
        }
        for (field, value) in [
            ("stiffness", self.stiffness),
            ("damping", self.damping),
            ("viscous_friction", self.viscous_friction),
        ] {
            if value < 0.0 {
                return Err(err(field, format!("must be >= 0, got {value}")));
            }
        }
        Ok(())
    }
}

/// A validated robot description. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel {
    joints: Vec<JointSpec>,
    home: Vec<f64>,
    dt_default: f64,
}

impl RobotModel {
    pub fn new(joints: Vec<JointSpec>, home: Vec<f64>, dt_default: f64) -> Result<Self> {
        if joints.is_empty() {
            return Err(Error::invariant("joints", "model has no joints"));
        }
        Error::check_dim("home", joints.len(), home.len())?;
        if !(dt_default.is_finite() && dt_default > 0.0) {
            return Err(Error::invariant(
                "dt_default",
                format!("must be > 0, got {dt_default}"),
            ));
        }
        let mut seen = HashSet::new();
        for (i, joint) in joints.iter().enumerate() {
            joint.validate(i)?;
            if !seen.insert(joint.name.as_str()) {
                return Err(Error::joint_invariant(
                    "name",
                    i,
                    &joint.name,
                    "duplicate joint name",
                ));
            }
        }
        for (i, (joint, &h)) in joints.iter().zip(&home).enumerate() {
            if !h.is_finite() || !joint.contains(h) {
                return Err(Error::joint_invariant(
                    "home",
                    i,
                    &joint.name,
                    format!("{h} outside [{}, {}]", joint.q_min, joint.q_max),
                ));
            }
        }
        Ok(Self {
            joints,
            home,
            dt_default,
        })
    }

    /// The illustrative 7-joint arm shipped in `configs/models/arm7_example.json`.
    ///
    /// Its limits and gains are plausible values for a desk-scale study, not
    /// measured parameters of any physical robot.
    pub fn example_arm() -> Self {
        Self::from_json_str(EXAMPLE_ARM_JSON, Path::new("arm7_example.json"))
            .expect("bundled example model is valid")
    }

    /// Single-joint model used by the toy training configuration.
    pub fn toy_1dof() -> Self {
        Self::from_json_str(TOY_1DOF_JSON, Path::new("toy_1dof.json"))
            .expect("bundled toy model is valid")
    }

    pub fn joints(&self) -> &[JointSpec] {
        &self.joints
    }

    pub fn joint(&self, index: usize) -> &JointSpec {
        &self.joints[index]
    }

    pub fn home(&self) -> &[f64] {
        &self.home
    }

    pub fn dt_default(&self) -> f64 {
        self.dt_default
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    /// Clamps each entry of `q` into its joint's position limits.
    pub fn clamp_positions(&self, q: &[f64]) -> Vec<f64> {
        self.joints
            .iter()
            .zip(q)
            .map(|(j, &v)| j.clamp_position(v))
            .collect()
    }

    /// The fully extended pose: every joint at zero.
    pub fn zero_configuration(&self) -> Result<Vec<f64>> {
        for (i, joint) in self.joints.iter().enumerate() {
            if !joint.contains(0.0) {
                return Err(Error::joint_invariant(
                    "zero_configuration",
                    i,
                    &joint.name,
                    format!("0 outside [{}, {}]", joint.q_min, joint.q_max),
                ));
            }
        }
        Ok(vec![0.0; self.dof()])
    }

    pub fn from_json_str(text: &str, origin: &Path) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Schema {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        file.into_model()
    }

    pub fn to_json_string(&self) -> String {
        let file = ModelFile {
            dt_default: self.dt_default,
            joints: self
                .joints
                .iter()
                .zip(&self.home)
                .map(|(j, &home)| JointEntry {
                    name: j.name.clone(),
                    q_min: j.q_min,
                    q_max: j.q_max,
                    qd_max: j.qd_max,
                    effort_max: j.effort_max,
                    stiffness: j.stiffness,
                    damping: j.damping,
                    inertia: j.inertia,
                    viscous_friction: j.viscous_friction,
                    home,
                })
                .collect(),
        };
        let mut text = serde_json::to_string_pretty(&file).expect("model serializes");
        text.push('\n');
        text
    }
}

pub fn load_robot_model(path: impl AsRef<Path>) -> Result<RobotModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    RobotModel::from_json_str(&text, path)
}

pub fn write_robot_model(model: &RobotModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, model.to_json_string()).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    dt_default: f64,
    joints: Vec<JointEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JointEntry {
    name: String,
    q_min: f64,
    q_max: f64,
    qd_max: f64,
    effort_max: f64,
    stiffness: f64,
    damping: f64,
    inertia: f64,
    viscous_friction: f64,
    home: f64,
}

impl ModelFile {
    fn into_model(self) -> Result<RobotModel> {
        let (joints, home) = self
            .joints
            .into_iter()
            .map(|e| {
                (
                    JointSpec {
                        name: e.name,
                        q_min: e.q_min,
                        q_max: e.q_max,
                        qd_max: e.qd_max,
                        effort_max: e.effort_max,
                        stiffness: e.stiffness,
                        damping: e.damping,
                        inertia: e.inertia,
                        viscous_friction: e.viscous_friction,
                    },
                    e.home,
                )
            })
            .unzip();
        RobotModel::new(joints, home, self.dt_default)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn joint(name: &str, q_min: f64, q_max: f64) -> JointSpec {
        JointSpec {
            name: name.to_owned(),
            q_min,
            q_max,
            qd_max: 1.0,
            effort_max: 50.0,
            stiffness: 100.0,
            damping: 20.0,
            inertia: 1.0,
            viscous_friction: 0.1,
        }
    }

    fn example_json() -> serde_json::Value {
        serde_json::from_str(EXAMPLE_ARM_JSON).unwrap()
    }

    fn load_value(v: &serde_json::Value) -> Result<RobotModel> {
        RobotModel::from_json_str(&v.to_string(), Path::new("fixture.json"))
    }

    #[test]
    fn bundled_example_has_seven_arm_joints() {
        let model = RobotModel::example_arm();
        assert_eq!(model.dof(), 7);
        let names: Vec<_> = model.joints().iter().map(|j| j.name.as_str()).collect();
        assert_eq!(
            names,
            ["arm_1", "arm_2", "arm_3", "arm_4", "arm_5", "arm_6", "arm_7"]
        );
        assert!(model.joints().iter().all(|j| j.inertia == 1.0));
        assert!(model.joints().iter().all(|j| j.viscous_friction == 0.1));
    }

    #[test]
    fn inverted_limits_name_the_joint() {
        let mut v = example_json();
        v["joints"][2]["q_min"] = 1.0.into();
        v["joints"][2]["q_max"] = (-1.0).into();
        let msg = load_value(&v).unwrap_err().to_string();
        assert!(msg.contains("joint 3"), "{msg}");
        assert!(msg.contains("arm_3"), "{msg}");
        assert!(msg.contains("q_min"), "{msg}");
    }

    #[test]
    fn home_outside_limits_names_home_and_joint() {
        let mut v = example_json();
        let q_max = v["joints"][1]["q_max"].as_f64().unwrap();
        v["joints"][1]["home"] = (q_max + 0.1).into();
        let msg = load_value(&v).unwrap_err().to_string();
        assert!(msg.contains("home"), "{msg}");
        assert!(msg.contains("joint 2"), "{msg}");
    }

    #[test]
    fn unknown_and_missing_keys_are_schema_errors() {
        let mut v = example_json();
        v["joints"][0]["stifness"] = 1.0.into();
        assert!(matches!(load_value(&v), Err(Error::Schema { .. })));

        let mut v = example_json();
        v["joints"][0].as_object_mut().unwrap().remove("inertia");
        assert!(matches!(load_value(&v), Err(Error::Schema { .. })));

        let mut v = example_json();
        v["dt_default"] = "fast".into();
        assert!(matches!(load_value(&v), Err(Error::Schema { .. })));

        let mut v = example_json();
        v["gravity"] = 9.81.into();
        assert!(matches!(load_value(&v), Err(Error::Schema { .. })));
    }

    #[test]
    fn missing_file_reports_path() {
        let err = load_robot_model("/nonexistent/model.json").unwrap_err();
        assert!(err.is_io());
        assert!(err.to_string().contains("/nonexistent/model.json"));
    }

    #[test]
    fn duplicate_names_rejected() {
        let joints = vec![joint("a", -1.0, 1.0), joint("a", -1.0, 1.0)];
        let err = RobotModel::new(joints, vec![0.0, 0.0], 0.01).unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn zero_configuration_examples() {
        assert_eq!(
            RobotModel::example_arm().zero_configuration().unwrap(),
            vec![0.0; 7]
        );
        let two = RobotModel::new(
            vec![joint("a", -1.0, 1.0), joint("b", -2.0, 0.5)],
            vec![0.0, 0.0],
            0.01,
        )
        .unwrap();
        assert_eq!(two.zero_configuration().unwrap(), vec![0.0, 0.0]);

        let mut joints = RobotModel::example_arm().joints().to_vec();
        joints[4].q_min = 0.2;
        let home = vec![0.2, -1.0, -0.2, 1.5, 0.5, 1.0, 0.0];
        let model = RobotModel::new(joints, home, 0.01).unwrap();
        let msg = model.zero_configuration().unwrap_err().to_string();
        assert!(msg.contains("joint 5"), "{msg}");
    }

    #[test]
    fn file_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let model = RobotModel::example_arm();
        write_robot_model(&model, &path).unwrap();
        assert_eq!(load_robot_model(&path).unwrap(), model);
    }

    fn arb_joint() -> impl Strategy<Value = (JointSpec, f64)> {
        (
            -3.0..3.0f64,
            -0.5..3.0f64,
            -0.5..3.0f64,
            -0.5..100.0f64,
            -10.0..1000.0f64,
            -10.0..100.0f64,
            -0.5..5.0f64,
            -0.5..1.0f64,
            -0.2..1.2f64,
        )
            .prop_map(|(lo, span, qd, eff, kp, kd, inertia, b, frac)| {
                let spec = JointSpec {
                    name: String::new(),
                    q_min: lo,
                    q_max: lo + span,
                    qd_max: qd,
                    effort_max: eff,
                    stiffness: kp,
                    damping: kd,
                    inertia,
                    viscous_friction: b,
                };
                (spec, lo + frac * span)
            })
    }

    proptest! {
        #[test]
        fn constructed_models_satisfy_invariants(
            entries in prop::collection::vec(arb_joint(), 1..6),
            dt in -0.01..0.1f64,
        ) {
            let (mut joints, home): (Vec<_>, Vec<_>) = entries.into_iter().unzip();
            for (i, j) in joints.iter_mut().enumerate() {
                j.name = format!("j{i}");
            }
            if let Ok(model) = RobotModel::new(joints, home, dt) {
                prop_assert!(model.dt_default() > 0.0);
                for (j, &h) in model.joints().iter().zip(model.home()) {
                    prop_assert!(j.q_min < j.q_max);
                    prop_assert!(j.qd_max > 0.0 && j.effort_max > 0.0 && j.inertia > 0.0);
                    prop_assert!(j.stiffness >= 0.0 && j.damping >= 0.0 && j.viscous_friction >= 0.0);
                    prop_assert!(h >= j.q_min && h <= j.q_max);
                }
                let reparsed = RobotModel::from_json_str(&model.to_json_string(), Path::new("x")).unwrap();
                prop_assert_eq!(reparsed, model);
            }
        }
    }
}
