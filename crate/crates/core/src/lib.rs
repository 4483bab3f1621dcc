//! Joint-space manipulator simulation for sim-to-real gap studies.
//!
//! The crate is organised around the data flow of a gap experiment:
//!
//! - [`model`]: the robot description (limits, gains, inertial parameters).
//! - [`dynamics`]: decoupled per-joint plant integrated with semi-implicit Euler.
//! - [`control`]: three controller pipelines (`GymPd`, `SimPd`, `RosPid`) that
//!   differ in how they enforce joint velocity limits.
//! - [`gap`]: step-response experiments, steady-state detection, accumulated
//!   error between trajectories and velocity-limit violation reports.
//! - [`policy`]: reset/step environment, squashed-affine policies and a
//!   cross-entropy-method trainer for the home-to-zero task.
//! - [`trajectory_csv`]: the trajectory CSV wire format.

pub mod control;
pub mod dynamics;
mod error;
pub mod gap;
pub mod model;
pub mod policy;
pub mod trajectory_csv;

pub use control::{ControllerState, ControllerVariant, PidGains};
pub use dynamics::{JointState, Trajectory};
pub use error::{Error, Result};
pub use gap::{GapReport, SettleParams, SettleReference, StepExperiment, ViolationReport};
pub use model::{JointSpec, RobotModel};
pub use policy::{Env, EnvConfig, Policy, TrainConfig, TrainHistory};
