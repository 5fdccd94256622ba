//! Kinematic tabletop world: depth-camera clouds, tick-by-tick execution
//! and rigid grasp attachment.

mod camera;
mod exec;
mod scene;
mod world;

use thiserror::Error;

pub use camera::{synth_cloud, synth_labeled, CameraSpec, Labels, MAX_TILT_DEG};
pub use exec::{execute, run, Execution, ExecutionTick, StopHandle, TickEvent, DEFAULT_TICK_RATE_HZ};
pub use scene::{random_scene, SCENE_GAP_M};
pub use world::{Attachment, Bin, Object, ObjectPose, ObjectSpec, Region, Shape, ShapeKind, World, WorldSpec};

use crate::controller::{plan, CommandLevel, ControllerError, TaskTarget};
use crate::grasp::GraspCandidate;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("execution interrupted by stop")]
    Interrupted,
    #[error("fault injected: {0}")]
    FaultInjected(String),
    #[error("robot is faulted; recover first")]
    Faulted,
    #[error("camera sees nothing")]
    NothingVisible,
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("unknown object {0}")]
    ObjectUnknown(String),
    #[error("unknown bin {0}")]
    BinUnknown(String),
    #[error("grasp on {0} missed")]
    GraspMissed(String),
    #[error("invalid world: {0}")]
    InvalidWorld(String),
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error("{0}")]
    Io(String),
}

/// Picks `object` with `grasp` and lifts it. Fails with `GraspMissed` when
/// the jaws close on nothing.
pub fn pick(
    world: &mut World,
    object: &str,
    grasp: &GraspCandidate,
    tick_rate: f64,
    stop: &StopHandle,
    on_tick: impl FnMut(&ExecutionTick),
) -> Result<Vec<ExecutionTick>, SimError> {
    let name = world.object(object)?.name.clone();
    let view = world.view([(name.clone(), grasp.pose())]);
    let traj = plan(
        &world.chain,
        &world.robot,
        &CommandLevel::Task(TaskTarget::Object(name)),
        &view,
    )?;
    let ticks = run(world, traj, tick_rate, stop, on_tick)?;
    check_held(world, object)?;
    Ok(ticks)
}

pub(crate) fn check_held(world: &World, object: &str) -> Result<(), SimError> {
    if world.attached.as_ref().is_none_or(|a| a.object != object) {
        return Err(SimError::GraspMissed(object.to_string()));
    }
    Ok(())
}

/// Carries whatever is held over `bin` and releases it with its centre at
/// the bin region's centre.
pub fn place(
    world: &mut World,
    bin: &str,
    tick_rate: f64,
    stop: &StopHandle,
    on_tick: impl FnMut(&ExecutionTick),
) -> Result<Vec<ExecutionTick>, SimError> {
    let name = world.bin(bin)?.name.clone();
    let view = world.view([]);
    let traj = plan(
        &world.chain,
        &world.robot,
        &CommandLevel::Task(TaskTarget::PutIn(name)),
        &view,
    )?;
    run(world, traj, tick_rate, stop, on_tick)
}

/// `pick` followed by `place`.
pub fn task_pick_place(
    world: &mut World,
    object: &str,
    grasp: &GraspCandidate,
    bin: &str,
    tick_rate: f64,
    stop: &StopHandle,
    mut on_tick: impl FnMut(&ExecutionTick),
) -> Result<Vec<ExecutionTick>, SimError> {
    world.bin(bin)?;
    let mut ticks = pick(world, object, grasp, tick_rate, stop, &mut on_tick)?;
    ticks.extend(place(world, bin, tick_rate, stop, &mut on_tick)?);
    Ok(ticks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grasp::plan_grasps;
    use crate::grasp::GraspConfig;
    use nalgebra::Point3;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn best_grasp(world: &World, id: &str) -> GraspCandidate {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let cloud = synth_cloud(world, &world.camera, &mut rng).unwrap();
        let at = world.object(id).unwrap().position();
        let plan = plan_grasps(&cloud, Some([at.x, at.y]), &GraspConfig::default(), 42).unwrap();
        plan.menu[0]
    }

    #[test]
    fn teddy_into_bin() {
        let mut w = World::shipped();
        let g = best_grasp(&w, "teddy");
        let ticks = task_pick_place(&mut w, "teddy", &g, "bin", 50.0, &StopHandle::new(), |_| {}).unwrap();
        let grasped = ticks
            .iter()
            .flat_map(|t| &t.events)
            .filter(|e| matches!(e, TickEvent::Grasped(_)))
            .count();
        assert_eq!(grasped, 1);
        let pos: Point3<f64> = w.object("teddy").unwrap().position();
        assert!(w.bin("bin").unwrap().region.contains(&pos), "{pos}");
        assert!(w.attached.is_none());
        assert_eq!(w.objects.len(), 2);
    }

    #[test]
    fn unknown_ids() {
        let mut w = World::shipped();
        let g = GraspCandidate {
            center: [0.0, 0.0],
            depth: 0.1,
            angle: 0.0,
            width: 0.05,
            q: 1.0,
        };
        let s = StopHandle::new();
        assert!(matches!(
            task_pick_place(&mut w, "cat", &g, "bin", 50.0, &s, |_| {}),
            Err(SimError::ObjectUnknown(_))
        ));
        assert!(matches!(
            task_pick_place(&mut w, "teddy", &g, "crate", 50.0, &s, |_| {}),
            Err(SimError::BinUnknown(_))
        ));
    }
}
