use std::path::Path as FsPath;

use nalgebra::{Quaternion, SVector, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::ControllerError;

pub const DOF: usize = 7;

pub type JointVector = SVector<f64, DOF>;

/// One revolute joint in standard Denavit–Hartenberg form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DhJoint {
    pub a: f64,
    pub d: f64,
    pub alpha: f64,
    pub theta_offset: f64,
    pub lo: f64,
    pub hi: f64,
    pub vmax: f64,
}

/// End-effector pose in the base frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

#[derive(Serialize, Deserialize)]
struct PoseWire {
    position: [f64; 3],
    /// w, x, y, z
    orientation: [f64; 4],
}

impl Serialize for Pose {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let q = self.orientation.quaternion();
        PoseWire {
            position: self.position.into(),
            orientation: [q.w, q.i, q.j, q.k],
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = PoseWire::deserialize(d)?;
        let [qw, qx, qy, qz] = w.orientation;
        Ok(Pose {
            position: w.position.into(),
            orientation: UnitQuaternion::from_quaternion(Quaternion::new(qw, qx, qy, qz)),
        })
    }
}

impl Pose {
    pub fn new(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Self { position, orientation }
    }

    /// Position distance and rotation angle to `other`.
    pub fn error_to(&self, other: &Pose) -> (f64, f64) {
        (
            (other.position - self.position).norm(),
            self.orientation.angle_to(&other.orientation),
        )
    }
}

/// Magnitudes used when a command omits its path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Defaults {
    pub cartesian_m: f64,
    pub joint_rad: f64,
}

impl Default for Defaults {
    fn default() -> Self {
        Self {
            cartesian_m: 0.10,
            joint_rad: 10f64.to_radians(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KinematicChain {
    pub dh: Vec<DhJoint>,
    pub home_pose: Pose,
    #[serde(default)]
    pub defaults: Defaults,
}

impl KinematicChain {
    /// The bundled Panda-like chain.
    pub fn shipped() -> Self {
        Self::from_json(include_str!("../../data/chain.json")).expect("bundled chain is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, ControllerError> {
        let chain: KinematicChain =
            serde_json::from_str(text).map_err(|e| ControllerError::InvalidChain(e.to_string()))?;
        chain.validate()?;
        Ok(chain)
    }

    pub fn load(path: impl AsRef<FsPath>) -> Result<Self, ControllerError> {
        let text = std::fs::read_to_string(path).map_err(|e| ControllerError::Io(e.to_string()))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("chain serializes")
    }

    fn validate(&self) -> Result<(), ControllerError> {
        if self.dh.len() != DOF {
            return Err(ControllerError::InvalidChain(format!(
                "expected {DOF} joints, found {}",
                self.dh.len()
            )));
        }
        for (i, j) in self.dh.iter().enumerate() {
            let vals = [j.a, j.d, j.alpha, j.theta_offset, j.lo, j.hi, j.vmax];
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(ControllerError::InvalidChain(format!(
                    "joint {} has a non-finite value",
                    i + 1
                )));
            }
            if j.lo >= j.hi {
                return Err(ControllerError::InvalidChain(format!("joint {}: lo >= hi", i + 1)));
            }
            if j.vmax <= 0.0 {
                return Err(ControllerError::InvalidChain(format!("joint {}: vmax <= 0", i + 1)));
            }
        }
        let home = super::kinematics::fk(self, &self.home_joints())?;
        if !home.position.iter().all(|v| v.is_finite()) {
            return Err(ControllerError::InvalidChain("home pose is not finite".into()));
        }
        Ok(())
    }

    /// The zero configuration, clamped into limits.
    pub fn home_joints(&self) -> JointVector {
        JointVector::from_fn(|i, _| 0f64.clamp(self.dh[i].lo, self.dh[i].hi))
    }

    pub fn check_limits(&self, q: &JointVector) -> Result<(), ControllerError> {
        for (i, (j, &v)) in self.dh.iter().zip(q.iter()).enumerate() {
            if !(v >= j.lo - 1e-9 && v <= j.hi + 1e-9) {
                return Err(ControllerError::LimitViolation {
                    joint: i + 1,
                    value: v,
                    lo: j.lo,
                    hi: j.hi,
                });
            }
        }
        Ok(())
    }

    pub fn within_limits(&self, q: &JointVector) -> bool {
        self.check_limits(q).is_ok()
    }

    /// Slowest joint speed; trajectories move all joints at this rate.
    pub fn min_vmax(&self) -> f64 {
        self.dh.iter().map(|j| j.vmax).fold(f64::INFINITY, f64::min)
    }

    /// Shoulder position: the point joint 2 rotates about.
    pub fn shoulder(&self) -> Vector3<f64> {
        Vector3::new(0.0, 0.0, self.dh[0].d)
    }

    /// Upper bound on the distance the tool can reach from the shoulder.
    pub fn reach(&self) -> f64 {
        self.dh[1..].iter().map(|j| j.a.hypot(j.d)).sum()
    }

    pub fn lower(&self) -> JointVector {
        JointVector::from_fn(|i, _| self.dh[i].lo)
    }

    pub fn upper(&self) -> JointVector {
        JointVector::from_fn(|i, _| self.dh[i].hi)
    }
}
