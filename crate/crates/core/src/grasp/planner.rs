use std::f64::consts::PI;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::candidate::{sample_on, wrap_angle, Footprint, GraspCandidate, Scorer};
use super::cem::{cem, CemError, CemParams};
use super::cloud::PointCloud;
use super::diverse::{select_diverse_with, ANGLE_WEIGHT};
use super::segment::{cluster, remove_plane, Cluster, Plane};
use super::GraspError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraspConfig {
    pub ransac_threshold: f64,
    pub ransac_iterations: usize,
    pub cluster_tolerance: f64,
    pub min_cluster_size: usize,
    pub max_cluster_size: usize,
    pub cem: CemParams,
    pub eps: f64,
    pub k: usize,
    pub angle_weight: f64,
    pub scorer: Scorer,
}

impl Default for GraspConfig {
    fn default() -> Self {
        Self {
            ransac_threshold: 0.005,
            ransac_iterations: 500,
            cluster_tolerance: 0.02,
            min_cluster_size: 30,
            max_cluster_size: 1_000_000,
            cem: CemParams::default(),
            eps: 0.05,
            k: 5,
            angle_weight: ANGLE_WEIGHT,
            scorer: Scorer::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Refinement {
    pub best: GraspCandidate,
    /// Every candidate CEM scored, in evaluation order.
    pub evaluated: Vec<GraspCandidate>,
    pub history: Vec<f64>,
}

fn to_vec(c: &GraspCandidate) -> DVector<f64> {
    DVector::from_vec(vec![c.center[0], c.center[1], c.angle, c.width])
}

/// CEM over (x, y, φ, width) seeded by stratified samples on the cluster.
pub fn refine(
    fp: &Footprint,
    points: &[nalgebra::Point3<f64>],
    params: &CemParams,
    scorer: &Scorer,
    rng: &mut ChaCha8Rng,
) -> Result<Refinement, GraspError> {
    let depth = fp.grasp_depth();
    let make = |x: &DVector<f64>| {
        let mut c = GraspCandidate {
            center: [x[0], x[1]],
            depth,
            angle: x[2],
            width: x[3],
            q: 0.0,
        };
        c.q = scorer.score(&c, fp);
        c
    };
    let initial: Vec<DVector<f64>> = sample_on(fp, points, params.population, scorer, rng)
        .iter()
        .map(to_vec)
        .collect();
    let max_width = scorer.max_width;
    let project = |x: &mut DVector<f64>| {
        x[2] = wrap_angle(x[2]);
        x[3] = x[3].clamp(1e-3, max_width);
    };
    match cem(params, initial, &[(2, PI)], |x| make(x).q, project, rng) {
        Ok(out) => Ok(Refinement {
            best: make(&out.best),
            evaluated: out.evaluated.iter().map(|(x, _)| make(x)).collect(),
            history: out.history,
        }),
        Err(CemError::EmptyElite { best, .. }) => Err(GraspError::EmptyElite(Box::new(make(&best)))),
        Err(CemError::InvalidParams(m)) => Err(GraspError::InvalidParams(m)),
    }
}

/// Best grasp on one cluster.
pub fn cem_refine(cluster: &Cluster, params: &CemParams, seed: u64) -> Result<GraspCandidate, GraspError> {
    let fp = Footprint::of(cluster)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    refine(&fp, &cluster.points, params, &Scorer::default(), &mut rng).map(|r| r.best)
}

#[derive(Debug, Clone)]
pub struct GraspPlan {
    pub plane: Plane,
    /// Clusters of the plane-removed cloud, largest first.
    pub clusters: Vec<Cluster>,
    pub target: usize,
    pub refinement: Refinement,
    /// ε-diverse menu, best first.
    pub menu: Vec<GraspCandidate>,
}

/// Full pipeline: plane removal, clustering, CEM on the cluster nearest
/// `target_hint` (largest when absent), then an ε-diverse menu.
pub fn plan_grasps(
    cloud: &PointCloud,
    target_hint: Option<[f64; 2]>,
    cfg: &GraspConfig,
    seed: u64,
) -> Result<GraspPlan, GraspError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (plane, above) = remove_plane(cloud, cfg.ransac_threshold, cfg.ransac_iterations, &mut rng)?;
    let clusters = cluster(
        &above,
        cfg.cluster_tolerance,
        cfg.min_cluster_size,
        cfg.max_cluster_size,
    );
    if clusters.is_empty() {
        return Err(GraspError::NoClusters);
    }
    let target = match target_hint {
        None => 0,
        Some([x, y]) => clusters
            .iter()
            .enumerate()
            .min_by(|a, b| {
                let da = (a.1.centroid.x - x).hypot(a.1.centroid.y - y);
                let db = (b.1.centroid.x - x).hypot(b.1.centroid.y - y);
                da.total_cmp(&db)
            })
            .map(|(i, _)| i)
            .expect("non-empty"),
    };
    let mut fp = Footprint::of(&clusters[target])?;
    // a top-down view rarely sees an object's base; the table bounds it
    let c = clusters[target].centroid;
    if plane.c > 1e-6 {
        fp.bottom_z = fp.bottom_z.min(-(plane.a * c.x + plane.b * c.y + plane.d) / plane.c);
    }
    let refinement = refine(&fp, &clusters[target].points, &cfg.cem, &cfg.scorer, &mut rng)?;
    let positive: Vec<GraspCandidate> = refinement.evaluated.iter().copied().filter(|c| c.q > 0.0).collect();
    let menu = select_diverse_with(&positive, cfg.eps, cfg.k, cfg.angle_weight);
    Ok(GraspPlan {
        plane,
        clusters,
        target,
        refinement,
        menu,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grasp::cloud::Frame;
    use crate::grasp::diverse::grasp_distance;
    use nalgebra::Point3;

    /// Table grid plus two boxes seen from above.
    fn scene() -> PointCloud {
        let mut pts = Vec::new();
        for i in 0..80 {
            for j in 0..80 {
                pts.push(Point3::new(i as f64 * 0.01, j as f64 * 0.01 - 0.4, 0.0));
            }
        }
        let mut block = |cx: f64, cy: f64, lx: f64, ly: f64, h: f64| {
            for i in 0..=(lx / 0.004) as usize {
                for j in 0..=(ly / 0.004) as usize {
                    pts.push(Point3::new(
                        cx - lx / 2.0 + i as f64 * 0.004,
                        cy - ly / 2.0 + j as f64 * 0.004,
                        h,
                    ));
                }
            }
        };
        block(0.3, 0.1, 0.12, 0.05, 0.15);
        block(0.5, -0.2, 0.06, 0.06, 0.1);
        PointCloud::new(pts, Frame::World).unwrap()
    }

    #[test]
    fn plans_a_diverse_menu() {
        let cfg = GraspConfig::default();
        let plan = plan_grasps(&scene(), Some([0.3, 0.1]), &cfg, 7).unwrap();
        assert_eq!(plan.clusters.len(), 2);
        let best = &plan.menu[0];
        assert!(best.q > 0.9, "{best:?}");
        // the long side runs along x, so jaws should close along y
        assert!((best.angle - PI / 2.0).abs() < 15f64.to_radians());
        assert!((best.depth - 0.12).abs() < 1e-9);
        for (i, a) in plan.menu.iter().enumerate() {
            for b in &plan.menu[i + 1..] {
                assert!(grasp_distance(a, b, cfg.angle_weight) >= cfg.eps);
            }
        }
        assert!(plan.menu.windows(2).all(|w| w[0].q >= w[1].q));
        assert!(plan.refinement.history.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn deterministic_under_seed() {
        let cfg = GraspConfig::default();
        let a = plan_grasps(&scene(), None, &cfg, 3).unwrap();
        let b = plan_grasps(&scene(), None, &cfg, 3).unwrap();
        assert_eq!(a.menu, b.menu);
    }

    #[test]
    fn cem_refine_single_cluster() {
        let pts: Vec<_> = (0..400)
            .map(|i| Point3::new((i % 20) as f64 * 0.0035, (i / 20) as f64 * 0.0035, 0.2))
            .collect();
        let cl = Cluster::from_points((0..pts.len()).collect(), pts);
        let best = cem_refine(&cl, &CemParams::default(), 1).unwrap();
        assert!(best.q > 0.95, "{best:?}");
    }
}
