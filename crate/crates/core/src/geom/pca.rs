use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use super::cloud::{Point, PointCloud};
use crate::error::{Error, Result};

/// Principal axes of a point cloud.
///
/// `axes[0]` carries the largest variance. Each axis points towards the
/// point farthest from the centroid (non-negative dot product) and the
/// third axis is then fixed so that the basis is right-handed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcaFrame {
    pub center: Point,
    pub axes: [Vector3<f64>; 3],
    pub eigenvalues: [f64; 3],
}

impl PcaFrame {
    /// Matrix with the axes as columns (maps frame coordinates to the cloud frame).
    pub fn basis(&self) -> Matrix3<f64> {
        Matrix3::from_columns(&self.axes)
    }
}

pub fn pca_frame(cloud: &PointCloud) -> Result<PcaFrame> {
    let pts = cloud.points();
    if pts.len() < 4 {
        return Err(Error::InsufficientData {
            needed: 4,
            got: pts.len(),
        });
    }
    let center = cloud.centroid()?;
    let mut cov = Matrix3::zeros();
    for p in pts {
        let d = p - center;
        cov += d * d.transpose();
    }
    cov /= pts.len() as f64;

    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues = order.map(|i| eig.eigenvalues[i].max(0.0));

    // Collinear or coincident points leave at most one meaningful direction.
    let tol = 1e-12 * eigenvalues[0].max(f64::MIN_POSITIVE);
    if eigenvalues[0] <= 1e-24 || eigenvalues[1] <= tol {
        return Err(Error::DegenerateGeometry(
            "covariance is rank deficient (points collinear or coincident)".into(),
        ));
    }

    let mut axes = order.map(|i| eig.eigenvectors.column(i).into_owned().normalize());

    let mut far = pts[0] - center;
    let mut far_d = far.norm_squared();
    for p in &pts[1..] {
        let d = p - center;
        let n = d.norm_squared();
        if n > far_d {
            far = d;
            far_d = n;
        }
    }
    for a in axes.iter_mut() {
        if a.dot(&far) < 0.0 {
            *a = -*a;
        }
    }
    if axes[0].cross(&axes[1]).dot(&axes[2]) < 0.0 {
        axes[2] = -axes[2];
    }

    Ok(PcaFrame {
        center,
        axes,
        eigenvalues,
    })
}
