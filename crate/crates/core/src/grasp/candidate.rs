use std::f64::consts::PI;

use nalgebra::{Point2, Point3, Vector2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::segment::Cluster;
use super::GraspError;
use crate::controller::GraspPose;

pub const MAX_GRIPPER_WIDTH: f64 = 0.10;
/// Extra opening beyond the object chord given to sampled candidates.
pub const WIDTH_MARGIN: f64 = 0.01;
/// Jaws close this far below the top of the object.
pub const GRASP_DEPTH_BELOW_TOP: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspCandidate {
    /// Table-plane centre.
    pub center: [f64; 2],
    pub depth: f64,
    /// Closing direction in `[0, π)`.
    pub angle: f64,
    pub width: f64,
    pub q: f64,
}

impl GraspCandidate {
    pub fn pose(&self) -> GraspPose {
        GraspPose {
            position: [self.center[0], self.center[1], self.depth],
            angle: self.angle,
            width: self.width,
        }
    }
}

pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(PI);
    if w >= PI {
        0.0
    } else {
        w
    }
}

/// Top-down outline of a cluster: its convex hull in the table plane.
#[derive(Debug, Clone, PartialEq)]
pub struct Footprint {
    /// Counter-clockwise, no repeated first vertex.
    pub hull: Vec<Point2<f64>>,
    pub top_z: f64,
    pub bottom_z: f64,
}

/// Where a line through the footprint enters and leaves it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Chord {
    pub length: f64,
    /// Outward edge normals at the entry and exit contacts.
    pub entry_normal: Vector2<f64>,
    pub exit_normal: Vector2<f64>,
}

impl Footprint {
    pub fn from_points(points: &[Point3<f64>]) -> Result<Self, GraspError> {
        let flat: Vec<Point2<f64>> = points.iter().map(|p| Point2::new(p.x, p.y)).collect();
        let hull = convex_hull(flat);
        if hull.len() < 3 || polygon_area(&hull) < 1e-10 {
            return Err(GraspError::DegenerateCluster);
        }
        let top_z = points.iter().map(|p| p.z).fold(f64::NEG_INFINITY, f64::max);
        let bottom_z = points.iter().map(|p| p.z).fold(f64::INFINITY, f64::min);
        Ok(Self { hull, top_z, bottom_z })
    }

    pub fn of(cluster: &Cluster) -> Result<Self, GraspError> {
        Self::from_points(&cluster.points)
    }

    pub fn contains(&self, p: &Point2<f64>) -> bool {
        let n = self.hull.len();
        (0..n).all(|i| {
            let a = self.hull[i];
            let b = self.hull[(i + 1) % n];
            cross(&(b - a), &(p - a)) >= -1e-12
        })
    }

    pub fn grasp_depth(&self) -> f64 {
        (self.top_z - GRASP_DEPTH_BELOW_TOP).max(self.bottom_z)
    }

    pub fn centroid(&self) -> Point2<f64> {
        let sum = self.hull.iter().fold(Vector2::zeros(), |a, p| a + p.coords);
        Point2::from(sum / self.hull.len() as f64)
    }

    /// Axis-aligned bounds `(min, max)` of the hull.
    pub fn bounds(&self) -> (Point2<f64>, Point2<f64>) {
        let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.hull {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (lo, hi)
    }

    /// The line through `center` along `angle`, if `center` is inside.
    pub fn chord(&self, center: &Point2<f64>, angle: f64) -> Option<Chord> {
        if !self.contains(center) {
            return None;
        }
        let u = Vector2::new(angle.cos(), angle.sin());
        let n = self.hull.len();
        let mut entry: Option<(f64, Vector2<f64>)> = None;
        let mut exit: Option<(f64, Vector2<f64>)> = None;
        for i in 0..n {
            let a = self.hull[i];
            let e = self.hull[(i + 1) % n] - a;
            let denom = cross(&u, &e);
            if denom.abs() < 1e-15 {
                continue;
            }
            let w = a - center;
            let t = cross(&w, &e) / denom;
            let s = cross(&w, &u) / denom;
            if !(-1e-9..=1.0 + 1e-9).contains(&s) {
                continue;
            }
            let normal = Vector2::new(e.y, -e.x).normalize();
            if t >= 0.0 && exit.is_none_or(|(bt, _)| t > bt) {
                exit = Some((t, normal));
            }
            if t <= 0.0 && entry.is_none_or(|(bt, _)| t < bt) {
                entry = Some((t, normal));
            }
        }
        let ((t0, n0), (t1, n1)) = (entry?, exit?);
        Some(Chord {
            length: t1 - t0,
            entry_normal: n0,
            exit_normal: n1,
        })
    }
}

fn cross(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

fn polygon_area(hull: &[Point2<f64>]) -> f64 {
    let n = hull.len();
    (0..n)
        .map(|i| cross(&hull[i].coords, &hull[(i + 1) % n].coords))
        .sum::<f64>()
        / 2.0
}

/// Andrew's monotone chain.
pub fn convex_hull(mut pts: Vec<Point2<f64>>) -> Vec<Point2<f64>> {
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let turn = |o: &Point2<f64>, a: &Point2<f64>, b: &Point2<f64>| cross(&(a - o), &(b - o));
    let mut hull: Vec<Point2<f64>> = Vec::with_capacity(2 * pts.len());
    for p in &pts {
        while hull.len() >= 2 && turn(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(*p);
    }
    let lower_len = hull.len() + 1;
    for p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && turn(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(*p);
    }
    hull.pop();
    hull
}

/// Geometric antipodal surrogate for grasp robustness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scorer {
    /// Friction cone half-angle, radians.
    pub friction_half_angle: f64,
    pub max_width: f64,
    /// Clearance per jaw at which the closure term saturates.
    pub clearance: f64,
}

impl Default for Scorer {
    fn default() -> Self {
        Self {
            friction_half_angle: 20f64.to_radians(),
            max_width: MAX_GRIPPER_WIDTH,
            clearance: WIDTH_MARGIN / 2.0,
        }
    }
}

impl Scorer {
    /// 1 for a contact normal on the closing axis, falling to 0 at the edge
    /// of the friction cone.
    pub fn alignment(&self, cos_misalignment: f64) -> f64 {
        let ca = self.friction_half_angle.cos();
        ((cos_misalignment - ca) / (1.0 - ca)).clamp(0.0, 1.0)
    }

    pub fn score(&self, c: &GraspCandidate, fp: &Footprint) -> f64 {
        if !(c.width > 0.0 && c.width <= self.max_width + 1e-12) {
            return 0.0;
        }
        let Some(chord) = fp.chord(&Point2::from(c.center), c.angle) else {
            return 0.0;
        };
        let u = Vector2::new(c.angle.cos(), c.angle.sin());
        let g_exit = self.alignment(chord.exit_normal.dot(&u));
        let g_entry = self.alignment(-chord.entry_normal.dot(&u));
        let margin = ((c.width - chord.length) / 2.0 / self.clearance).clamp(0.0, 1.0);
        ((g_exit * g_entry).sqrt() * margin).clamp(0.0, 1.0)
    }

    /// Candidate at the given pose with a width fitted to the chord.
    pub fn fitted(&self, fp: &Footprint, center: [f64; 2], angle: f64) -> GraspCandidate {
        let angle = wrap_angle(angle);
        let width = fp.chord(&Point2::from(center), angle).map_or(self.max_width, |ch| {
            (ch.length + 2.0 * self.clearance).min(self.max_width)
        });
        let mut c = GraspCandidate {
            center,
            depth: fp.grasp_depth(),
            angle,
            width,
            q: 0.0,
        };
        c.q = self.score(&c, fp);
        c
    }
}

pub fn score(c: &GraspCandidate, fp: &Footprint) -> f64 {
    Scorer::default().score(c, fp)
}

/// `n` scored candidates: centres drawn from cluster points, angles
/// stratified over `[0, π)`.
pub fn sample_candidates<R: Rng + ?Sized>(
    cluster: &Cluster,
    n: usize,
    scorer: &Scorer,
    rng: &mut R,
) -> Result<Vec<GraspCandidate>, GraspError> {
    let fp = Footprint::of(cluster)?;
    Ok(sample_on(&fp, &cluster.points, n, scorer, rng))
}

pub fn sample_on<R: Rng + ?Sized>(
    fp: &Footprint,
    points: &[Point3<f64>],
    n: usize,
    scorer: &Scorer,
    rng: &mut R,
) -> Vec<GraspCandidate> {
    if points.is_empty() {
        return Vec::new();
    }
    (0..n)
        .map(|k| {
            let angle = (k as f64 + rng.random::<f64>()) / n as f64 * PI;
            let p = points[rng.random_range(0..points.len())];
            scorer.fitted(fp, [p.x, p.y], angle)
        })
        .collect()
}
