use nalgebra::{Point3, SymmetricEigen, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::cloud::PointCloud;
use super::kdtree::KdTree;
use super::pca::{centroid, covariance, pca, Pca};
use super::GraspError;

pub const MIN_PLANE_INLIER_RATIO: f64 = 0.30;

/// `a x + b y + c z + d = 0` with unit normal and `c >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Plane {
    fn from_normal(n: Vector3<f64>, through: &Point3<f64>) -> Self {
        let mut n = n.normalize();
        if n.z < 0.0 || (n.z == 0.0 && (n.y < 0.0 || (n.y == 0.0 && n.x < 0.0))) {
            n = -n;
        }
        Plane {
            a: n.x,
            b: n.y,
            c: n.z,
            d: -n.dot(&through.coords),
        }
    }

    pub fn normal(&self) -> Vector3<f64> {
        Vector3::new(self.a, self.b, self.c)
    }

    pub fn signed_distance(&self, p: &Point3<f64>) -> f64 {
        self.normal().dot(&p.coords) + self.d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlaneRemoval {
    pub plane: Plane,
    /// Indices into the input of the points kept above the plane.
    pub kept: Vec<usize>,
    pub inliers: usize,
}

/// RANSAC table fit followed by a least-squares refit on the inliers.
/// Inliers and everything below the plane are dropped.
pub fn remove_plane<R: Rng + ?Sized>(
    cloud: &PointCloud,
    threshold: f64,
    iterations: usize,
    rng: &mut R,
) -> Result<(Plane, PointCloud), GraspError> {
    let r = remove_plane_indexed(cloud, threshold, iterations, rng)?;
    Ok((r.plane, cloud.select(&r.kept)))
}

pub fn remove_plane_indexed<R: Rng + ?Sized>(
    cloud: &PointCloud,
    threshold: f64,
    iterations: usize,
    rng: &mut R,
) -> Result<PlaneRemoval, GraspError> {
    let pts = &cloud.points;
    let n = pts.len();
    if n < 3 {
        return Err(GraspError::DegenerateCloud);
    }
    let spread = SymmetricEigen::new(covariance(pts, &centroid(pts))).eigenvalues;
    let mut ev: Vec<f64> = spread.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    if !(ev[0] > 0.0) || ev[1] <= ev[0] * 1e-14 {
        return Err(GraspError::DegenerateCloud);
    }

    let count = |plane: &Plane| {
        pts.iter()
            .filter(|p| plane.signed_distance(p).abs() <= threshold)
            .count()
    };
    let mut best: Option<(usize, Plane)> = None;
    for _ in 0..iterations.max(1) {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        let k = rng.random_range(0..n);
        if i == j || j == k || i == k {
            continue;
        }
        let normal = (pts[j] - pts[i]).cross(&(pts[k] - pts[i]));
        if normal.norm() < 1e-12 {
            continue;
        }
        let plane = Plane::from_normal(normal, &pts[i]);
        let c = count(&plane);
        if best.is_none_or(|(b, _)| c > b) {
            best = Some((c, plane));
        }
    }
    let Some((_, rough)) = best else {
        return Err(GraspError::DegenerateCloud);
    };

    let inlier_pts: Vec<Point3<f64>> = pts
        .iter()
        .filter(|p| rough.signed_distance(p).abs() <= threshold)
        .copied()
        .collect();
    let plane = refit(&inlier_pts).unwrap_or(rough);
    let inliers = count(&plane);
    let ratio = inliers as f64 / n as f64;
    if ratio < MIN_PLANE_INLIER_RATIO {
        return Err(GraspError::NoPlaneFound { ratio });
    }
    let kept = (0..n).filter(|&i| plane.signed_distance(&pts[i]) > threshold).collect();
    Ok(PlaneRemoval { plane, kept, inliers })
}

fn refit(points: &[Point3<f64>]) -> Option<Plane> {
    if points.len() < 3 {
        return None;
    }
    let c = centroid(points);
    let eig = SymmetricEigen::new(covariance(points, &c));
    let smallest = eig.eigenvalues.imin();
    Some(Plane::from_normal(eig.eigenvectors.column(smallest).into_owned(), &c))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    /// Indices into the clustered cloud, ascending.
    pub indices: Vec<usize>,
    pub points: Vec<Point3<f64>>,
    pub centroid: Point3<f64>,
    /// Absent when the points are collinear.
    pub principal: Option<Pca>,
}

impl Cluster {
    pub fn from_points(indices: Vec<usize>, points: Vec<Point3<f64>>) -> Self {
        let principal = pca(&points).ok();
        Self {
            centroid: centroid(&points),
            indices,
            points,
            principal,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Euclidean single-linkage components at `tolerance`, found with a kd-tree;
/// components outside `[min_size, max_size]` are dropped. Largest first.
pub fn cluster(cloud: &PointCloud, tolerance: f64, min_size: usize, max_size: usize) -> Vec<Cluster> {
    let labels = components(&cloud.points, tolerance);
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, &l) in labels.iter().enumerate() {
        if l == groups.len() {
            groups.push(Vec::new());
        }
        groups[l].push(i);
    }
    let mut out: Vec<Cluster> = groups
        .into_iter()
        .filter(|g| (min_size..=max_size).contains(&g.len()))
        .map(|g| {
            let pts = g.iter().map(|&i| cloud.points[i]).collect();
            Cluster::from_points(g, pts)
        })
        .collect();
    out.sort_by(|a, b| b.len().cmp(&a.len()).then(a.indices[0].cmp(&b.indices[0])));
    out
}

/// Component label per point, numbered in order of first appearance.
pub fn components(points: &[Point3<f64>], tolerance: f64) -> Vec<usize> {
    const UNSEEN: usize = usize::MAX;
    let tree = KdTree::build(points);
    let mut labels = vec![UNSEEN; points.len()];
    let mut next = 0;
    let mut queue = Vec::new();
    let mut near = Vec::new();
    for seed in 0..points.len() {
        if labels[seed] != UNSEEN {
            continue;
        }
        labels[seed] = next;
        queue.push(seed);
        while let Some(i) = queue.pop() {
            tree.within(&points[i], tolerance, &mut near);
            for &j in &near {
                if labels[j] == UNSEEN {
                    labels[j] = next;
                    queue.push(j);
                }
            }
        }
        next += 1;
    }
    labels
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grasp::cloud::Frame;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    #[test]
    fn noiseless_plane_is_exact() {
        // z = 0.1 x - 0.2 y + 0.3
        let mut pts = Vec::new();
        for i in 0..30 {
            for j in 0..30 {
                let (x, y) = (i as f64 * 0.01, j as f64 * 0.01);
                pts.push(Point3::new(x, y, 0.1 * x - 0.2 * y + 0.3));
            }
        }
        pts.push(Point3::new(0.1, 0.1, 0.9));
        let cloud = PointCloud::new(pts, Frame::World).unwrap();
        let (plane, rest) = remove_plane(&cloud, 0.001, 200, &mut rng()).unwrap();
        let n = Vector3::new(-0.1, 0.2, 1.0).normalize();
        assert!((plane.normal() - n).norm() < 1e-9);
        assert!((plane.d - (-0.3 * n.z)).abs() < 1e-9);
        assert_eq!(rest.points, vec![Point3::new(0.1, 0.1, 0.9)]);
    }

    #[test]
    fn degenerate_clouds() {
        let two = PointCloud::new(vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0)], Frame::World).unwrap();
        assert_eq!(
            remove_plane(&two, 0.005, 10, &mut rng()),
            Err(GraspError::DegenerateCloud)
        );
        let line: Vec<_> = (0..20).map(|i| Point3::new(i as f64, 2.0 * i as f64, 0.0)).collect();
        let line = PointCloud::new(line, Frame::World).unwrap();
        assert_eq!(
            remove_plane(&line, 0.005, 10, &mut rng()),
            Err(GraspError::DegenerateCloud)
        );
    }

    #[test]
    fn scattered_cloud_has_no_plane() {
        let mut r = rng();
        let pts: Vec<_> = (0..500)
            .map(|_| Point3::new(r.random(), r.random(), r.random()))
            .collect();
        let cloud = PointCloud::new(pts, Frame::World).unwrap();
        assert!(matches!(
            remove_plane(&cloud, 0.005, 100, &mut rng()),
            Err(GraspError::NoPlaneFound { .. })
        ));
    }

    #[test]
    fn clusters_sorted_and_filtered() {
        let mut pts = Vec::new();
        for (cx, n) in [(0.0, 50), (1.0, 80), (2.0, 3)] {
            for i in 0..n {
                pts.push(Point3::new(cx + (i % 10) as f64 * 0.005, (i / 10) as f64 * 0.005, 0.0));
            }
        }
        let cloud = PointCloud::new(pts, Frame::World).unwrap();
        let cs = cluster(&cloud, 0.01, 5, 1000);
        assert_eq!(cs.iter().map(Cluster::len).collect::<Vec<_>>(), vec![80, 50]);
        assert_eq!(cs[0].indices[0], 50);
        assert!(cluster(&cloud, 0.01, 100, 1000).is_empty());
    }
}
