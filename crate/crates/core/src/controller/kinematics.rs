use nalgebra::{Isometry3, Matrix6, Matrix6x1, SMatrix, Translation3, UnitQuaternion, Vector3, Vector6};

use super::chain::{DhJoint, JointVector, KinematicChain, Pose, DOF};
use super::ControllerError;

pub type Jacobian = SMatrix<f64, 6, DOF>;

pub const IK_MAX_ITERATIONS: usize = 200;
pub const IK_POSITION_TOL: f64 = 1e-3;
pub const IK_ORIENTATION_TOL: f64 = 1e-2;

const IK_DAMPING: f64 = 1e-2;
const IK_CONVERGED: f64 = 1e-11;
const IK_MAX_STEP: f64 = 0.25;

/// T = Rz(θ) · Tz(d) · Tx(a) · Rx(α)
fn dh_transform(j: &DhJoint, q: f64) -> Isometry3<f64> {
    let theta = q + j.theta_offset;
    let rz = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), theta);
    let rx = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), j.alpha);
    let t = rz * Vector3::new(j.a, 0.0, j.d);
    Isometry3::from_parts(Translation3::from(t), rz * rx)
}

/// Frame of every link: `frames[0]` is the base, `frames[7]` the tool.
fn frames(chain: &KinematicChain, q: &JointVector) -> [Isometry3<f64>; DOF + 1] {
    let mut out = [Isometry3::identity(); DOF + 1];
    for i in 0..DOF {
        out[i + 1] = out[i] * dh_transform(&chain.dh[i], q[i]);
    }
    out
}

/// Forward kinematics without the limit check.
pub fn fk_unchecked(chain: &KinematicChain, q: &JointVector) -> Pose {
    let tool = frames(chain, q)[DOF];
    Pose {
        position: tool.translation.vector,
        orientation: tool.rotation,
    }
}

pub fn fk(chain: &KinematicChain, q: &JointVector) -> Result<Pose, ControllerError> {
    chain.check_limits(q)?;
    Ok(fk_unchecked(chain, q))
}

/// Geometric Jacobian: rows 0..3 linear velocity, 3..6 angular velocity.
pub fn jacobian(chain: &KinematicChain, q: &JointVector) -> Jacobian {
    let f = frames(chain, q);
    let p = f[DOF].translation.vector;
    let mut jac = Jacobian::zeros();
    for (i, frame) in f.iter().take(DOF).enumerate() {
        let z = frame.rotation * Vector3::z();
        let o = frame.translation.vector;
        let lin = z.cross(&(p - o));
        jac.fixed_view_mut::<3, 1>(0, i).copy_from(&lin);
        jac.fixed_view_mut::<3, 1>(3, i).copy_from(&z);
    }
    jac
}

fn pose_error(current: &Pose, target: &Pose) -> Vector6<f64> {
    let dp = target.position - current.position;
    let dr = (target.orientation * current.orientation.inverse()).scaled_axis();
    Vector6::new(dp.x, dp.y, dp.z, dr.x, dr.y, dr.z)
}

/// Damped least-squares inverse kinematics seeded at `seed`.
pub fn ik(chain: &KinematicChain, target: &Pose, seed: &JointVector) -> Result<JointVector, ControllerError> {
    chain.check_limits(seed)?;
    let fail = |residual: f64| ControllerError::IkFailure { waypoint: 0, residual };

    let to_target = (target.position - chain.shoulder()).norm();
    if !to_target.is_finite() || to_target > chain.reach() {
        return Err(fail(to_target - chain.reach()));
    }

    let mut q = *seed;
    let mut err = pose_error(&fk_unchecked(chain, &q), target);
    let damping = Matrix6::identity() * IK_DAMPING * IK_DAMPING;
    for _ in 0..IK_MAX_ITERATIONS {
        if err.norm() < IK_CONVERGED {
            break;
        }
        let j = jacobian(chain, &q);
        let jjt = j * j.transpose() + damping;
        let Some(y) = jjt.cholesky().map(|c| c.solve(&Matrix6x1::from(err))) else {
            break;
        };
        let mut dq = j.transpose() * y;
        let step = dq.amax();
        if step > IK_MAX_STEP {
            dq *= IK_MAX_STEP / step;
        }
        q += dq;
        err = pose_error(&fk_unchecked(chain, &q), target);
    }

    let pos = err.fixed_rows::<3>(0).norm();
    let rot = err.fixed_rows::<3>(3).norm();
    if !(pos <= IK_POSITION_TOL && rot <= IK_ORIENTATION_TOL) {
        return Err(fail(pos.max(rot)));
    }
    chain.check_limits(&q)?;
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn chain() -> KinematicChain {
        KinematicChain::shipped()
    }

    #[test]
    fn zero_joints_give_frozen_home() {
        let c = chain();
        let p = fk(&c, &JointVector::zeros()).unwrap();
        let (dp, dr) = p.error_to(&c.home_pose);
        assert!(dp < 1e-12, "{dp}");
        assert!(dr < 1e-9, "{dr}");
    }

    #[test]
    fn joint_one_rotates_about_base_z() {
        let c = chain();
        let mut q = JointVector::zeros();
        q[0] = PI;
        let p = fk(&c, &q).unwrap().position;
        let h = c.home_pose.position;
        assert!((p - Vector3::new(-h.x, -h.y, h.z)).norm() < 1e-12);
    }

    #[test]
    fn fk_rejects_out_of_limits() {
        let mut q = JointVector::zeros();
        q[1] = 3.0;
        assert!(matches!(
            fk(&chain(), &q),
            Err(ControllerError::LimitViolation { joint: 2, .. })
        ));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let c = chain();
        let q = JointVector::from_column_slice(&[0.3, 0.2, -0.4, 1.0, 0.5, 1.2, -0.7]);
        let j = jacobian(&c, &q);
        let h = 1e-6;
        for i in 0..DOF {
            let mut a = q;
            let mut b = q;
            a[i] += h;
            b[i] -= h;
            let (pa, pb) = (fk_unchecked(&c, &a), fk_unchecked(&c, &b));
            let v = (pa.position - pb.position) / (2.0 * h);
            let w = (pa.orientation * pb.orientation.inverse()).scaled_axis() / (2.0 * h);
            assert!((v - j.fixed_view::<3, 1>(0, i)).norm() < 1e-7);
            assert!((w - j.fixed_view::<3, 1>(3, i)).norm() < 1e-7);
        }
    }

    #[test]
    fn ik_recovers_nearby_pose() {
        let c = chain();
        let q = JointVector::from_column_slice(&[0.1, 0.4, 0.0, 0.8, 0.0, 1.0, 0.3]);
        let mut seed = q;
        seed.iter_mut().for_each(|v| *v += 0.05);
        let target = fk(&c, &q).unwrap();
        let sol = ik(&c, &target, &seed).unwrap();
        let (dp, dr) = fk(&c, &sol).unwrap().error_to(&target);
        assert!(dp < 1e-6 && dr < 1e-6);
    }

    #[test]
    fn ik_fixed_point() {
        let c = chain();
        let q = JointVector::from_column_slice(&[0.5, -0.2, 0.3, 1.1, -0.4, 0.9, 0.0]);
        let sol = ik(&c, &fk(&c, &q).unwrap(), &q).unwrap();
        assert!((sol - q).amax() < 1e-6);
    }

    #[test]
    fn ik_unreachable() {
        let c = chain();
        let target = Pose::new(Vector3::new(0.0, 0.0, 10.0), UnitQuaternion::identity());
        assert!(matches!(
            ik(&c, &target, &JointVector::zeros()),
            Err(ControllerError::IkFailure { .. })
        ));
    }
}
