use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::world::World;
use super::SimError;
use crate::controller::{GripperAction, GripperState, JointTrajectory, JointVector, Pose, Sample};

pub const DEFAULT_TICK_RATE_HZ: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TickEvent {
    Grasped(String),
    Released(String),
    Stopped,
    Completed,
    Fault(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTick {
    pub t: f64,
    pub joints: [f64; 7],
    pub ee_pose: Pose,
    pub gripper: GripperState,
    /// Object poses while something is held: `(id, position)`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub carried: Vec<(String, [f64; 3])>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<TickEvent>,
}

/// Cross-thread stop signal for one executor.
#[derive(Debug, Clone, Default)]
pub struct StopHandle {
    requested: Arc<AtomicBool>,
    running: Arc<AtomicBool>,
}

impl StopHandle {
    pub fn new() -> Self {
        Self::default()
    }

    /// Requests a halt. Returns whether an execution was running; a stop
    /// while idle has no effect.
    pub fn stop(&self) -> bool {
        let running = self.running.load(Ordering::SeqCst);
        if running {
            self.requested.store(true, Ordering::SeqCst);
        }
        running
    }

    pub fn is_running(&self) -> bool {
        self.running.load(Ordering::SeqCst)
    }

    fn begin(&self) {
        self.requested.store(false, Ordering::SeqCst);
        self.running.store(true, Ordering::SeqCst);
    }

    fn end(&self) {
        self.running.store(false, Ordering::SeqCst);
        self.requested.store(false, Ordering::SeqCst);
    }

    fn take(&self) -> bool {
        self.requested.swap(false, Ordering::SeqCst)
    }
}

enum Phase {
    Running,
    /// Halted; the error is still to be surfaced.
    Failing(SimError),
    Done,
}

/// Steps a trajectory through the world at a fixed tick rate.
pub struct Execution<'w> {
    world: &'w mut World,
    traj: JointTrajectory,
    dt: f64,
    tick: usize,
    /// Index of the next sample whose gripper flag has not fired.
    next_flag: usize,
    stop: StopHandle,
    phase: Phase,
}

/// Starts executing `traj`; iterate to advance. Yields ticks, then at most
/// one error, then ends.
pub fn execute<'w>(
    world: &'w mut World,
    traj: JointTrajectory,
    tick_rate: f64,
    stop: &StopHandle,
) -> Result<Execution<'w>, SimError> {
    if !(tick_rate > 0.0) {
        return Err(SimError::InvalidTrajectory("tick rate must be positive".into()));
    }
    if world.robot.faulted {
        return Err(SimError::Faulted);
    }
    traj.validate(&world.chain).map_err(SimError::Controller)?;
    if let Some(q0) = traj.first_q() {
        if (q0 - world.robot.joints).amax() > 1e-6 {
            return Err(SimError::InvalidTrajectory(
                "trajectory does not start at the current joints".into(),
            ));
        }
    }
    world.resume = None;
    stop.begin();
    Ok(Execution {
        world,
        traj,
        dt: 1.0 / tick_rate,
        tick: 0,
        next_flag: 0,
        stop: stop.clone(),
        phase: Phase::Running,
    })
}

fn interpolate(samples: &[Sample], t: f64) -> JointVector {
    let k = samples.partition_point(|s| s.t <= t);
    if k == 0 {
        return samples[0].q;
    }
    if k == samples.len() {
        return samples[k - 1].q;
    }
    let (a, b) = (&samples[k - 1], &samples[k]);
    let s = (t - a.t) / (b.t - a.t);
    a.q + (b.q - a.q) * s
}

impl Execution<'_> {
    fn snapshot(&self, t: f64, events: Vec<TickEvent>) -> ExecutionTick {
        let w = &self.world;
        let carried = w
            .attached
            .as_ref()
            .and_then(|a| w.object(&a.object).ok())
            .map(|o| vec![(o.id.clone(), o.pose.translation.vector.into())])
            .unwrap_or_default();
        ExecutionTick {
            t,
            joints: w.robot.joints.into(),
            ee_pose: w.ee_pose(),
            gripper: w.robot.gripper.clone(),
            carried,
            events,
        }
    }

    fn apply_gripper(&mut self, action: GripperAction, events: &mut Vec<TickEvent>) {
        let ee = self.world.ee_pose();
        match action {
            GripperAction::Open { width } => {
                self.world.opening = width.min(crate::grasp::MAX_GRIPPER_WIDTH);
                if let Some(a) = self.world.attached.take() {
                    events.push(TickEvent::Released(a.object));
                }
                self.world.robot.gripper = GripperState::Open;
            }
            GripperAction::Close => {
                if self.world.attached.is_some() {
                    return;
                }
                match self.world.graspable_at(&ee) {
                    Some(i) => {
                        self.world.attach(i, &ee);
                        let id = self.world.objects[i].id.clone();
                        self.world.robot.gripper = GripperState::Holding(id.clone());
                        events.push(TickEvent::Grasped(id));
                    }
                    None => self.world.robot.gripper = GripperState::Closed,
                }
            }
        }
    }

    /// What is left of the trajectory from time `t`, re-timed from zero.
    fn remainder(&self, t: f64) -> JointTrajectory {
        let mut samples = vec![Sample {
            t: 0.0,
            q: self.world.robot.joints,
            gripper: None,
        }];
        let from = self.traj.samples.partition_point(|s| s.t <= t);
        samples.extend(self.traj.samples[from..].iter().map(|s| Sample {
            t: s.t - t,
            ..s.clone()
        }));
        JointTrajectory {
            samples,
            origin: self.traj.origin.clone(),
        }
    }
}

impl Iterator for Execution<'_> {
    type Item = Result<ExecutionTick, SimError>;

    fn next(&mut self) -> Option<Self::Item> {
        match std::mem::replace(&mut self.phase, Phase::Done) {
            Phase::Done => return None,
            Phase::Failing(e) => {
                self.stop.end();
                return Some(Err(e));
            }
            Phase::Running => {}
        }
        let duration = self.traj.duration();
        let now = (self.tick as f64 * self.dt).min(duration);
        let prev = if self.tick == 0 {
            0.0
        } else {
            ((self.tick - 1) as f64 * self.dt).min(duration)
        };

        if let Some(msg) = self.world.fault.clone() {
            self.world.robot.faulted = true;
            self.phase = Phase::Failing(SimError::FaultInjected(msg.clone()));
            return Some(Ok(self.snapshot(prev, vec![TickEvent::Fault(msg)])));
        }
        if self.stop.take() {
            self.world.resume = Some(self.remainder(prev));
            self.phase = Phase::Failing(SimError::Interrupted);
            return Some(Ok(self.snapshot(prev, vec![TickEvent::Stopped])));
        }

        let mut events = Vec::new();
        if !self.traj.is_empty() {
            // fire gripper flags in order, moving the arm to each one first
            while self.next_flag < self.traj.len() && self.traj.samples[self.next_flag].t <= now {
                let s = &self.traj.samples[self.next_flag];
                let (q, action) = (s.q, s.gripper);
                self.next_flag += 1;
                if let Some(a) = action {
                    self.world.robot.joints = q;
                    let ee = self.world.ee_pose();
                    self.world.carry(&ee);
                    self.apply_gripper(a, &mut events);
                }
            }
            self.world.robot.joints = interpolate(&self.traj.samples, now);
            let ee: Pose = self.world.ee_pose();
            self.world.carry(&ee);
        }
        let done = now >= duration;
        if done {
            events.push(TickEvent::Completed);
            self.stop.end();
        } else {
            self.phase = Phase::Running;
        }
        self.tick += 1;
        Some(Ok(self.snapshot(now, events)))
    }
}

impl Drop for Execution<'_> {
    fn drop(&mut self) {
        self.stop.end();
    }
}

/// Drives an execution to its end, handing each tick to `on_tick`.
pub fn run(
    world: &mut World,
    traj: JointTrajectory,
    tick_rate: f64,
    stop: &StopHandle,
    mut on_tick: impl FnMut(&ExecutionTick),
) -> Result<Vec<ExecutionTick>, SimError> {
    let mut ticks = Vec::new();
    for item in execute(world, traj, tick_rate, stop)? {
        let tick = item?;
        on_tick(&tick);
        ticks.push(tick);
    }
    Ok(ticks)
}
