//! Command levels, kinematics and joint trajectories for the seven-joint arm.

mod chain;
mod kinematics;
mod level;
mod trajectory;

use thiserror::Error;

pub use chain::{Defaults, DhJoint, JointVector, KinematicChain, Pose, DOF};
pub use kinematics::{
    fk, fk_unchecked, ik, jacobian, Jacobian, IK_MAX_ITERATIONS, IK_ORIENTATION_TOL, IK_POSITION_TOL,
};
pub use level::{
    classify, default_path, plan, top_down_orientation, translate, ActionKind, CommandLevel, GraspPose, GripperState,
    LevelKind, RobotState, TaskTarget, WorldView, APPROACH_HEIGHT_M,
};
pub use trajectory::{
    GripperAction, JointTrajectory, Sample, TrajectoryBuilder, CARTESIAN_STEP_M, GRIPPER_DWELL_S, SAMPLE_DT,
    SAMPLE_RATE_HZ,
};

use crate::sdc::Sdc;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControllerError {
    #[error("joint {joint} at {value:.4} rad is outside [{lo:.4}, {hi:.4}]")]
    LimitViolation { joint: usize, value: f64, lo: f64, hi: f64 },
    #[error("no inverse kinematics solution at waypoint {waypoint} (residual {residual:.3e})")]
    IkFailure { waypoint: usize, residual: f64 },
    #[error("no grasp selected for {0}")]
    NoGraspSelected(String),
    #[error("{0} admits no command level")]
    AmbiguousCommand(Box<Sdc>),
    #[error("unit {unit} does not fit a {level} command")]
    UnitMismatch { unit: String, level: LevelKind },
    #[error("unknown target {0}")]
    UnknownTarget(String),
    #[error("robot is faulted; recover first")]
    Faulted,
    #[error("invalid chain: {0}")]
    InvalidChain(String),
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("{0}")]
    Io(String),
}
