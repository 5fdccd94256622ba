use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::chain::{JointVector, KinematicChain, Pose};
use super::kinematics::{fk_unchecked, ik};
use super::ControllerError;
use crate::sdc::Sdc;

pub const SAMPLE_RATE_HZ: f64 = 100.0;
pub const SAMPLE_DT: f64 = 1.0 / SAMPLE_RATE_HZ;
/// Cartesian segments are cut into waypoints at most this far apart.
pub const CARTESIAN_STEP_M: f64 = 0.01;
pub const CARTESIAN_STEP_RAD: f64 = 0.05;
/// Time the arm holds still while the gripper moves.
pub const GRIPPER_DWELL_S: f64 = 0.5;
/// Largest per-joint change tolerated between adjacent 1 cm waypoints.
const MAX_WAYPOINT_JUMP: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum GripperAction {
    Open { width: f64 },
    Close,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub q: JointVector,
    /// Gripper command issued when execution reaches this sample.
    pub gripper: Option<GripperAction>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct JointTrajectory {
    pub samples: Vec<Sample>,
    pub origin: Option<Sdc>,
}

impl JointTrajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    pub fn first_q(&self) -> Option<JointVector> {
        self.samples.first().map(|s| s.q)
    }

    pub fn final_q(&self) -> Option<JointVector> {
        self.samples.last().map(|s| s.q)
    }

    /// Times strictly increasing from zero, every sample within limits and
    /// every step within the joint speed bounds.
    pub fn validate(&self, chain: &KinematicChain) -> Result<(), ControllerError> {
        let bad = |m: String| Err(ControllerError::InvalidTrajectory(m));
        let Some(first) = self.samples.first() else {
            return Ok(());
        };
        if first.t != 0.0 {
            return bad(format!("first sample at t = {}", first.t));
        }
        for s in &self.samples {
            chain.check_limits(&s.q)?;
        }
        for (k, w) in self.samples.windows(2).enumerate() {
            let dt = w[1].t - w[0].t;
            if dt <= 0.0 || !dt.is_finite() {
                return bad(format!("time not increasing at sample {}", k + 1));
            }
            for (i, joint) in chain.dh.iter().enumerate() {
                let dq = (w[1].q[i] - w[0].q[i]).abs();
                if dq > joint.vmax * dt * (1.0 + 1e-9) + 1e-12 {
                    return bad(format!(
                        "joint {} exceeds {} rad/s at sample {}",
                        i + 1,
                        joint.vmax,
                        k + 1
                    ));
                }
            }
        }
        Ok(())
    }

    /// CSV with header `t,q1,...,q7`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,q1,q2,q3,q4,q5,q6,q7\n");
        for s in &self.samples {
            let _ = write!(out, "{}", s.t);
            for v in s.q.iter() {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    /// Pose of the tool at the last sample.
    pub fn final_pose(&self, chain: &KinematicChain) -> Option<Pose> {
        self.final_q().map(|q| fk_unchecked(chain, &q))
    }
}

/// Appends constant-speed joint moves sampled at 100 Hz.
pub struct TrajectoryBuilder<'c> {
    chain: &'c KinematicChain,
    samples: Vec<Sample>,
    speed: f64,
}

impl<'c> TrajectoryBuilder<'c> {
    pub fn new(chain: &'c KinematicChain, start: JointVector) -> Self {
        Self {
            chain,
            samples: vec![Sample {
                t: 0.0,
                q: start,
                gripper: None,
            }],
            speed: chain.min_vmax(),
        }
    }

    pub fn current(&self) -> JointVector {
        self.samples.last().expect("builder always has a sample").q
    }

    fn now(&self) -> f64 {
        self.samples.last().expect("builder always has a sample").t
    }

    /// Straight joint-space move, every joint arriving together.
    pub fn move_to(&mut self, target: JointVector) -> Result<(), ControllerError> {
        self.chain.check_limits(&target)?;
        let start = self.current();
        let delta = target - start;
        let duration = delta.amax() / self.speed;
        if duration == 0.0 {
            return Ok(());
        }
        let n = (duration / SAMPLE_DT - 1e-9).ceil().max(1.0) as usize;
        let t0 = self.now();
        for k in 1..=n {
            let s = k as f64 / n as f64;
            self.samples.push(Sample {
                t: t0 + k as f64 * SAMPLE_DT,
                q: if k == n { target } else { start + delta * s },
                gripper: None,
            });
        }
        Ok(())
    }

    /// Holds still for the gripper and flags the action.
    pub fn gripper(&mut self, action: GripperAction) {
        let q = self.current();
        let t = self.now() + GRIPPER_DWELL_S;
        self.samples.push(Sample {
            t,
            q,
            gripper: Some(action),
        });
    }

    /// Straight-line tool motion with orientation slerp, cut into 1 cm /
    /// 0.05 rad waypoints, each solved by IK seeded from the previous one.
    /// `waypoint_base` offsets the index reported on IK failure.
    pub fn cartesian_to(&mut self, target: &Pose, waypoint_base: usize) -> Result<usize, ControllerError> {
        let start = fk_unchecked(self.chain, &self.current());
        let (dist, angle) = start.error_to(target);
        let n = ((dist / CARTESIAN_STEP_M).ceil())
            .max((angle / CARTESIAN_STEP_RAD).ceil())
            .max(1.0) as usize;
        let mut q = self.current();
        let mut waypoints = Vec::with_capacity(n);
        for k in 1..=n {
            let s = k as f64 / n as f64;
            let pose = Pose {
                position: start.position.lerp(&target.position, s),
                orientation: start
                    .orientation
                    .try_slerp(&target.orientation, s, 1e-12)
                    .unwrap_or(target.orientation),
            };
            let waypoint = waypoint_base + k;
            let next = ik(self.chain, &pose, &q).map_err(|e| match e {
                ControllerError::IkFailure { residual, .. } => ControllerError::IkFailure { waypoint, residual },
                other => other,
            })?;
            let jump = (next - q).amax();
            if jump > MAX_WAYPOINT_JUMP {
                return Err(ControllerError::IkFailure {
                    waypoint,
                    residual: jump,
                });
            }
            waypoints.push(next);
            q = next;
        }
        for w in waypoints {
            self.move_to(w)?;
        }
        Ok(waypoint_base + n)
    }

    pub fn finish(self, origin: Option<Sdc>) -> JointTrajectory {
        JointTrajectory {
            samples: self.samples,
            origin,
        }
    }
}
