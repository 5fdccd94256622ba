use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{Matrix3, Rotation3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::chain::{Defaults, JointVector, KinematicChain, Pose};
use super::kinematics::fk;
use super::trajectory::{GripperAction, JointTrajectory, TrajectoryBuilder};
use super::ControllerError;
use crate::lexicon::Category;
use crate::sdc::{Path, Place, Sdc};

/// Pre-grasp and retreat height above the grasp point.
pub const APPROACH_HEIGHT_M: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskTarget {
    /// Pick the named object with its selected grasp.
    Object(String),
    /// Pick with the n-th (1-based) grasp of the presented menu.
    GraspIndex(u32),
    /// Release the held object into the named container.
    PutIn(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Stop,
    Start,
    Recover,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CommandLevel {
    Task(TaskTarget),
    /// `distance` is never negative; the sign lives in `direction`.
    OperationalSpace {
        direction: Unit<Vector3<f64>>,
        distance: f64,
    },
    /// 1-based joint index.
    JointSpace {
        joint: u8,
        delta: f64,
    },
    Action(ActionKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelKind {
    Task,
    OperationalSpace,
    JointSpace,
    Action,
}

impl fmt::Display for LevelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LevelKind::Task => "task",
            LevelKind::OperationalSpace => "operational_space",
            LevelKind::JointSpace => "joint_space",
            LevelKind::Action => "action",
        })
    }
}

impl CommandLevel {
    pub fn kind(&self) -> LevelKind {
        match self {
            CommandLevel::Task(_) => LevelKind::Task,
            CommandLevel::OperationalSpace { .. } => LevelKind::OperationalSpace,
            CommandLevel::JointSpace { .. } => LevelKind::JointSpace,
            CommandLevel::Action(_) => LevelKind::Action,
        }
    }
}

impl fmt::Display for CommandLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CommandLevel::Task(TaskTarget::Object(o)) => write!(f, "Task({o})"),
            CommandLevel::Task(TaskTarget::GraspIndex(i)) => write!(f, "Task(grasp #{i})"),
            CommandLevel::Task(TaskTarget::PutIn(o)) => write!(f, "Task(put in {o})"),
            CommandLevel::OperationalSpace { direction: d, distance } => write!(
                f,
                "OperationalSpace(({:.3}, {:.3}, {:.3}), {distance:.4} m)",
                d.x, d.y, d.z
            ),
            CommandLevel::JointSpace { joint, delta } => write!(f, "JointSpace({joint}, {delta:.4} rad)"),
            CommandLevel::Action(a) => write!(f, "Action({a:?})"),
        }
    }
}

/// Path used when an SDC leaves it out.
pub fn default_path(kind: LevelKind, defaults: &Defaults) -> Option<Path> {
    match kind {
        LevelKind::OperationalSpace => Some(Path::new(defaults.cartesian_m * 100.0, "Centimetres")),
        LevelKind::JointSpace => Some(Path::new(defaults.joint_rad.to_degrees(), "Degrees")),
        LevelKind::Task | LevelKind::Action => None,
    }
}

fn metres(path: &Path) -> Option<f64> {
    let scale = match path.unit.name.as_str() {
        "Centimetres" => 0.01,
        "Millimetres" => 0.001,
        "Metres" => 1.0,
        _ => return None,
    };
    Some(path.magnitude * scale)
}

fn radians(path: &Path) -> Option<f64> {
    match path.unit.name.as_str() {
        "Degrees" => Some(path.magnitude.to_radians()),
        "Radians" => Some(path.magnitude),
        _ => None,
    }
}

fn direction_of(place: &Place) -> Option<Vector3<f64>> {
    let Place::Word(w) = place else { return None };
    let v = match (w.category, w.name.as_str()) {
        (Category::PlaceWords, "Forward") | (Category::Axes, "X") => Vector3::x(),
        (Category::PlaceWords, "Backward") => -Vector3::x(),
        (Category::PlaceWords, "Left") | (Category::Axes, "Y") => Vector3::y(),
        (Category::PlaceWords, "Right") => -Vector3::y(),
        (Category::PlaceWords, "Up") | (Category::Axes, "Z") => Vector3::z(),
        (Category::PlaceWords, "Down") => -Vector3::z(),
        _ => return None,
    };
    Some(v)
}

fn joint_of(place: &Place) -> Option<u8> {
    match place {
        Place::Joint(j) => Some(*j),
        Place::Word(w) if w.category == Category::PlaceWords => match w.name.as_str() {
            "One" => Some(1),
            "Two" => Some(2),
            "Three" => Some(3),
            "Four" => Some(4),
            "Five" => Some(5),
            "Six" => Some(6),
            "Seven" => Some(7),
            _ => None,
        },
        _ => None,
    }
}

/// Picks the command level from the event and which slots are filled.
pub fn classify(sdc: &Sdc, defaults: &Defaults) -> Result<CommandLevel, ControllerError> {
    let ambiguous = || ControllerError::AmbiguousCommand(Box::new(sdc.clone()));
    let event = sdc.event.name.as_str();
    let joint = sdc.place.as_ref().and_then(joint_of);
    let direction = sdc.place.as_ref().and_then(direction_of);
    let choice = match sdc.place {
        Some(Place::Choice(n)) => Some(n),
        _ => None,
    };
    let object = sdc.object.as_ref().map(|o| o.name.clone());

    match event {
        "Stop" => return Ok(CommandLevel::Action(ActionKind::Stop)),
        "Start" => return Ok(CommandLevel::Action(ActionKind::Start)),
        "Recover" => return Ok(CommandLevel::Action(ActionKind::Recover)),
        _ => {}
    }

    if matches!(event, "Move" | "Rotate") {
        if let Some(j) = joint {
            if !(1..=7).contains(&j) {
                return Err(ambiguous());
            }
            let path = sdc
                .path
                .clone()
                .or_else(|| default_path(LevelKind::JointSpace, defaults))
                .expect("joint default exists");
            let delta = radians(&path).ok_or_else(|| ControllerError::UnitMismatch {
                unit: path.unit.name.clone(),
                level: LevelKind::JointSpace,
            })?;
            return Ok(CommandLevel::JointSpace { joint: j, delta });
        }
    }

    match event {
        "Move" => {
            if let Some(dir) = direction {
                let path = sdc
                    .path
                    .clone()
                    .or_else(|| default_path(LevelKind::OperationalSpace, defaults))
                    .expect("cartesian default exists");
                let signed = metres(&path).ok_or_else(|| ControllerError::UnitMismatch {
                    unit: path.unit.name.clone(),
                    level: LevelKind::OperationalSpace,
                })?;
                let direction = Unit::new_normalize(if signed < 0.0 { -dir } else { dir });
                return Ok(CommandLevel::OperationalSpace {
                    direction,
                    distance: signed.abs(),
                });
            }
            match object {
                Some(o) => Ok(CommandLevel::Task(TaskTarget::Object(o))),
                None => Err(ambiguous()),
            }
        }
        "Grab" => match (choice, object) {
            (Some(n), _) => Ok(CommandLevel::Task(TaskTarget::GraspIndex(n))),
            (None, Some(o)) => Ok(CommandLevel::Task(TaskTarget::Object(o))),
            (None, None) => Err(ambiguous()),
        },
        "Put" => match object {
            Some(o) => Ok(CommandLevel::Task(TaskTarget::PutIn(o))),
            None => Err(ambiguous()),
        },
        _ => Err(ambiguous()),
    }
}

/// A top-down parallel-jaw grasp in the base frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspPose {
    /// Tool centre point at closure.
    pub position: [f64; 3],
    /// Closing direction angle in the table plane.
    pub angle: f64,
    pub width: f64,
}

/// What the controller may know about the scene.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WorldView {
    /// Grasp chosen for each object, by high-level name.
    pub selected: BTreeMap<String, GraspPose>,
    /// Menu presented to the operator, if any.
    pub menu: Vec<GraspPose>,
    /// Tool position at which to release, by container name.
    pub drop_points: BTreeMap<String, [f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GripperState {
    Open,
    Closed,
    Holding(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotState {
    pub joints: JointVector,
    pub gripper: GripperState,
    pub faulted: bool,
}

impl RobotState {
    pub fn at_home(chain: &KinematicChain) -> Self {
        Self {
            joints: chain.home_joints(),
            gripper: GripperState::Open,
            faulted: false,
        }
    }
}

/// Tool-down orientation whose fingers close along `angle`, flipped by π
/// if that brings it closer to `current`.
pub fn top_down_orientation(angle: f64, current: &UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    let make = |phi: f64| {
        let z = -Vector3::z();
        let y = Vector3::new(phi.cos(), phi.sin(), 0.0);
        let x = y.cross(&z);
        UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[x, y, z])))
    };
    let a = make(angle);
    let b = make(angle + std::f64::consts::PI);
    if a.angle_to(current) <= b.angle_to(current) {
        a
    } else {
        b
    }
}

/// Maps the current state and one SDC to a joint trajectory.
pub fn translate(
    chain: &KinematicChain,
    state: &RobotState,
    sdc: &Sdc,
    world: &WorldView,
) -> Result<JointTrajectory, ControllerError> {
    let level = classify(sdc, &chain.defaults)?;
    let mut traj = plan(chain, state, &level, world)?;
    traj.origin = Some(sdc.clone());
    Ok(traj)
}

/// Trajectory for an already classified command.
pub fn plan(
    chain: &KinematicChain,
    state: &RobotState,
    level: &CommandLevel,
    world: &WorldView,
) -> Result<JointTrajectory, ControllerError> {
    if let CommandLevel::Action(_) = level {
        return Ok(JointTrajectory::default());
    }
    if state.faulted {
        return Err(ControllerError::Faulted);
    }
    let start_pose = fk(chain, &state.joints)?;
    let mut b = TrajectoryBuilder::new(chain, state.joints);
    match level {
        CommandLevel::Action(_) => unreachable!(),
        CommandLevel::JointSpace { joint, delta } => {
            let mut target = state.joints;
            target[usize::from(*joint) - 1] += delta;
            b.move_to(target)?;
        }
        CommandLevel::OperationalSpace { direction, distance } => {
            let target = Pose::new(
                start_pose.position + direction.into_inner() * *distance,
                start_pose.orientation,
            );
            if *distance > 0.0 {
                b.cartesian_to(&target, 0)?;
            }
        }
        CommandLevel::Task(TaskTarget::Object(name)) => {
            let grasp = world
                .selected
                .get(name)
                .ok_or_else(|| ControllerError::NoGraspSelected(name.clone()))?;
            pick(&mut b, grasp, &start_pose)?;
        }
        CommandLevel::Task(TaskTarget::GraspIndex(n)) => {
            let grasp = (*n as usize)
                .checked_sub(1)
                .and_then(|i| world.menu.get(i))
                .ok_or_else(|| ControllerError::NoGraspSelected(format!("menu entry {n}")))?;
            pick(&mut b, grasp, &start_pose)?;
        }
        CommandLevel::Task(TaskTarget::PutIn(name)) => {
            let drop = world
                .drop_points
                .get(name)
                .ok_or_else(|| ControllerError::UnknownTarget(name.clone()))?;
            put(&mut b, Vector3::from(*drop), &start_pose)?;
        }
    }
    Ok(b.finish(None))
}

fn pick(b: &mut TrajectoryBuilder<'_>, grasp: &GraspPose, start: &Pose) -> Result<(), ControllerError> {
    let at = Vector3::from(grasp.position);
    let up = Vector3::z() * APPROACH_HEIGHT_M;
    let orientation = top_down_orientation(grasp.angle, &start.orientation);
    b.gripper(GripperAction::Open { width: grasp.width });
    let mut w = b.cartesian_to(&Pose::new(at + up, orientation), 0)?;
    w = b.cartesian_to(&Pose::new(at, orientation), w)?;
    b.gripper(GripperAction::Close);
    b.cartesian_to(&Pose::new(at + up, orientation), w)?;
    Ok(())
}

fn put(b: &mut TrajectoryBuilder<'_>, at: Vector3<f64>, start: &Pose) -> Result<(), ControllerError> {
    let up = Vector3::z() * APPROACH_HEIGHT_M;
    let orientation = start.orientation;
    let mut w = b.cartesian_to(&Pose::new(at + up, orientation), 0)?;
    w = b.cartesian_to(&Pose::new(at, orientation), w)?;
    b.gripper(GripperAction::Open { width: 0.08 });
    b.cartesian_to(&Pose::new(at + up, orientation), w)?;
    Ok(())
}
