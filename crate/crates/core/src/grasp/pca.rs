use nalgebra::{Matrix3, Point3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use super::GraspError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub centroid: Point3<f64>,
    /// Orthonormal, right-handed, by descending variance.
    pub axes: [Vector3<f64>; 3],
    pub variances: [f64; 3],
}

pub fn centroid(points: &[Point3<f64>]) -> Point3<f64> {
    let sum = points.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords);
    Point3::from(sum / points.len().max(1) as f64)
}

pub fn covariance(points: &[Point3<f64>], mean: &Point3<f64>) -> Matrix3<f64> {
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - mean;
        cov += d * d.transpose();
    }
    cov / points.len().max(1) as f64
}

fn canonical_sign(v: Vector3<f64>) -> Vector3<f64> {
    const TIE: f64 = 1e-12;
    let flip = if v.x.abs() > TIE {
        v.x < 0.0
    } else if v.y.abs() > TIE {
        v.y < 0.0
    } else {
        v.z < 0.0
    };
    if flip {
        -v
    } else {
        v
    }
}

/// Principal axes of a point set. The first two axes have a non-negative
/// x component (y on a tie); the third completes a right-handed frame.
pub fn pca(points: &[Point3<f64>]) -> Result<Pca, GraspError> {
    if points.len() < 3 {
        return Err(GraspError::DegenerateCluster);
    }
    let c = centroid(points);
    let eig = SymmetricEigen::new(covariance(points, &c));
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let variances = order.map(|i| eig.eigenvalues[i].max(0.0));
    if !(variances[0] > 0.0) || variances[1] <= variances[0] * 1e-12 {
        return Err(GraspError::DegenerateCluster);
    }
    let a0 = canonical_sign(eig.eigenvectors.column(order[0]).normalize());
    let a1 = canonical_sign(eig.eigenvectors.column(order[1]).normalize());
    // re-orthogonalize against rounding before completing the frame
    let a1 = (a1 - a0 * a0.dot(&a1)).normalize();
    let a2 = a0.cross(&a1);
    Ok(Pca {
        centroid: c,
        axes: [a0, a1, a2],
        variances,
    })
}
