use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::camera::CameraSpec;
use super::world::{ObjectPose, ObjectSpec, ShapeKind, WorldSpec};

/// Clear gap kept between the bounding circles of generated objects.
pub const SCENE_GAP_M: f64 = 0.05;

/// A seeded tabletop with `count` random boxes, cylinders and spheres
/// resting on the table, pairwise at least `SCENE_GAP_M` apart, inside the
/// default camera's view. No bins.
pub fn random_scene(seed: u64, count: usize) -> WorldSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut placed: Vec<([f64; 2], f64)> = Vec::with_capacity(count);
    let mut objects = Vec::with_capacity(count);
    let mut attempts = 0;
    while objects.len() < count && attempts < 10_000 {
        attempts += 1;
        let (shape, dims, radius, height) = match rng.random_range(0..3) {
            0 => {
                let (x, y, z) = (
                    rng.random_range(0.04..0.10),
                    rng.random_range(0.04..0.10),
                    rng.random_range(0.05..0.20),
                );
                (ShapeKind::Box, vec![x, y, z], f64::hypot(x, y) / 2.0, z)
            }
            1 => {
                let (r, h) = (rng.random_range(0.02..0.045), rng.random_range(0.06..0.22));
                (ShapeKind::Cylinder, vec![r, h], r, h)
            }
            _ => {
                let r = rng.random_range(0.025..0.05);
                (ShapeKind::Sphere, vec![r], r, 2.0 * r)
            }
        };
        let at = [rng.random_range(0.25..0.65), rng.random_range(-0.30..0.30)];
        let yaw = rng.random_range(0.0..std::f64::consts::PI);
        if placed
            .iter()
            .any(|(p, r)| f64::hypot(p[0] - at[0], p[1] - at[1]) < r + radius + SCENE_GAP_M)
        {
            continue;
        }
        placed.push((at, radius));
        objects.push(ObjectSpec {
            id: format!("obj{}", objects.len() + 1),
            name: "Object".into(),
            shape,
            dims,
            pose: ObjectPose {
                position: [at[0], at[1], height / 2.0],
                yaw,
            },
        });
    }
    WorldSpec {
        table_z: 0.0,
        objects,
        bins: Vec::new(),
        camera: CameraSpec::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::KinematicChain;
    use crate::sim::World;

    #[test]
    fn seeded_and_separated() {
        for seed in 0..20 {
            let spec = random_scene(seed, 5);
            assert_eq!(spec, random_scene(seed, 5));
            assert_eq!(spec.objects.len(), 5);
            let w = World::new(spec, KinematicChain::shipped()).unwrap();
            assert!(w.objects.iter().all(|o| o.bottom_z().abs() < 1e-12));
        }
    }
}
