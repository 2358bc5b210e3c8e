use nalgebra::{Matrix3, Vector3};

use super::cloud::{Point, PointCloud};
use crate::error::{Error, Result};

const ORTHONORMAL_TOL: f64 = 1e-9;

/// A proper rigid motion `p' = R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let ortho_err = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        if !(ortho_err <= ORTHONORMAL_TOL) {
            return Err(Error::InvalidTransform(format!(
                "rotation is not orthonormal (max deviation {ortho_err:e})"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(Error::InvalidTransform(format!(
                "rotation determinant is {det}, expected +1"
            )));
        }
        if !translation.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidTransform("non-finite translation".into()));
        }
        Ok(Self { rotation, translation })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    /// Skips validation; callers guarantee `rotation` is a proper rotation.
    pub(crate) fn from_parts_unchecked(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self { rotation, translation }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn apply(&self, p: &Point) -> Point {
        self.rotation * p + self.translation
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }
}

/// Applies `t` to every point; the result is labelled with `frame_id`.
pub fn transform_cloud(cloud: &PointCloud, t: &RigidTransform, frame_id: &str) -> PointCloud {
    let points = cloud.points().iter().map(|p| t.apply(p)).collect();
    // Rigid maps keep finite coordinates finite.
    PointCloud::new(points, frame_id).expect("rigid transform of a finite cloud is finite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;

    fn sample_transform() -> RigidTransform {
        let r = Rotation3::from_euler_angles(0.3, -1.1, 2.0);
        RigidTransform::new(*r.matrix(), Vector3::new(0.5, -2.0, 1.25)).unwrap()
    }

    #[test]
    fn rejects_reflection() {
        let m = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(RigidTransform::new(m, Vector3::zeros()).is_err());
    }

    #[test]
    fn identity_leaves_cloud_unchanged() {
        let c = PointCloud::from_xyz(&[[1.0, 2.0, 3.0], [-1.0, 0.5, 0.0]], "a").unwrap();
        let out = transform_cloud(&c, &RigidTransform::identity(), "a");
        assert_eq!(out, c);
    }

    #[test]
    fn translation_moves_origin() {
        let c = PointCloud::from_xyz(&[[0.0, 0.0, 0.0]], "a").unwrap();
        let t = RigidTransform::from_translation(Vector3::new(1.0, 0.0, 0.0));
        let out = transform_cloud(&c, &t, "b");
        assert_eq!(out.points()[0], Vector3::new(1.0, 0.0, 0.0));
        assert_eq!(out.frame_id(), "b");
    }

    #[test]
    fn inverse_round_trip() {
        let t = sample_transform();
        let c = PointCloud::from_xyz(&[[0.1, 0.2, 0.3], [4.0, -5.0, 6.0], [0.0, 0.0, 0.0]], "a").unwrap();
        let back = transform_cloud(&transform_cloud(&c, &t, "b"), &t.inverse(), "a");
        for (p, q) in c.points().iter().zip(back.points()) {
            assert!((p - q).norm() < 1e-12);
        }
    }

    #[test]
    fn composition_is_associative() {
        let a = sample_transform();
        let b = RigidTransform::new(
            *Rotation3::from_euler_angles(1.0, 0.2, -0.4).matrix(),
            Vector3::new(0.0, 1.0, 2.0),
        )
        .unwrap();
        let c = a.inverse();
        let l = a.compose(&b).compose(&c);
        let r = a.compose(&b.compose(&c));
        assert!((l.rotation() - r.rotation()).abs().max() < 1e-12);
        assert!((l.translation() - r.translation()).norm() < 1e-12);
    }
}
