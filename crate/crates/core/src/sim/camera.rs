use nalgebra::{Point3, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::world::World;
use super::SimError;
use crate::grasp::{Frame, PointCloud};

/// Largest angle between the optical axis and straight down.
pub const MAX_TILT_DEG: f64 = 45.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraSpec {
    pub position: [f64; 3],
    /// Point the optical axis passes through.
    pub target: [f64; 3],
    pub fov_deg: f64,
    pub resolution: usize,
    pub noise_sigma: f64,
}

impl Default for CameraSpec {
    fn default() -> Self {
        Self {
            position: [0.45, 0.0, 1.0],
            target: [0.45, 0.0, 0.0],
            fov_deg: 60.0,
            resolution: 160,
            noise_sigma: 0.001,
        }
    }
}

/// Per-point source: an object id, or `None` for the table.
pub type Labels = Vec<Option<String>>;

/// Z-buffer ray casting of the table and every object on a
/// `resolution × resolution` pinhole grid, with Gaussian depth noise.
pub fn synth_cloud<R: Rng + ?Sized>(world: &World, camera: &CameraSpec, rng: &mut R) -> Result<PointCloud, SimError> {
    synth_labeled(world, camera, rng).map(|(c, _)| c)
}

pub fn synth_labeled<R: Rng + ?Sized>(
    world: &World,
    camera: &CameraSpec,
    rng: &mut R,
) -> Result<(PointCloud, Labels), SimError> {
    let eye = Point3::from(camera.position);
    let forward = Point3::from(camera.target) - eye;
    if forward.norm() < 1e-9 {
        return Err(SimError::InvalidCamera("target equals position".into()));
    }
    let forward = forward.normalize();
    let tilt = forward.dot(&-Vector3::z()).clamp(-1.0, 1.0).acos();
    if tilt > MAX_TILT_DEG.to_radians() + 1e-12 {
        return Err(SimError::InvalidCamera(format!(
            "optical axis {:.1}° off vertical",
            tilt.to_degrees()
        )));
    }
    if eye.z <= world.table_z {
        return Err(SimError::InvalidCamera("camera below the table".into()));
    }
    if camera.resolution == 0 || !(camera.fov_deg > 0.0 && camera.fov_deg < 180.0) {
        return Err(SimError::InvalidCamera("bad resolution or field of view".into()));
    }
    let helper = if forward.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let right = forward.cross(&helper).normalize();
    let up = right.cross(&forward);
    let half = (camera.fov_deg.to_radians() / 2.0).tan();
    let noise = (camera.noise_sigma > 0.0).then(|| Normal::new(0.0, camera.noise_sigma).expect("positive sigma"));

    let n = camera.resolution;
    let mut points = Vec::with_capacity(n * n);
    let mut labels = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let sx = (2.0 * (i as f64 + 0.5) / n as f64 - 1.0) * half;
            let sy = (2.0 * (j as f64 + 0.5) / n as f64 - 1.0) * half;
            let dir = (forward + right * sx + up * sy).normalize();
            let mut hit: Option<(f64, Option<&str>)> = None;
            if dir.z < -1e-12 {
                hit = Some(((world.table_z - eye.z) / dir.z, None));
            }
            for o in &world.objects {
                let inv = o.pose.inverse();
                if let Some(t) = o.shape.ray_hit(&(inv * eye), &(inv * dir)) {
                    if hit.is_none_or(|(best, _)| t < best) {
                        hit = Some((t, Some(o.id.as_str())));
                    }
                }
            }
            if let Some((t, label)) = hit {
                let t = t + noise.map_or(0.0, |nd| nd.sample(rng));
                points.push(eye + dir * t);
                labels.push(label.map(str::to_string));
            }
        }
    }
    if points.is_empty() {
        return Err(SimError::NothingVisible);
    }
    let cloud = PointCloud::new(points, Frame::World).map_err(|e| SimError::InvalidCamera(e.to_string()))?;
    Ok((cloud, labels))
}
