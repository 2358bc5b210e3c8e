//! Tabletop segmentation: RANSAC plane removal followed by single-linkage
//! Euclidean clustering, plus loading of pre-segmented reference components.

use std::path::Path;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{load_ply, KdTree, Point, PointCloud};

/// Minimum inlier fraction for a plane to count as dominant.
pub const MIN_PLANE_FRACTION: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    /// Unit normal; its largest-magnitude component is positive.
    pub normal: [f64; 3],
    /// Plane is `normal · p + offset = 0`.
    pub offset: f64,
}

impl Plane {
    pub fn signed_distance(&self, p: &Point) -> f64 {
        Vector3::from(self.normal).dot(p) + self.offset
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentationConfig {
    pub plane_distance: f64,
    pub plane_iterations: usize,
    pub cluster_tolerance: f64,
    pub min_cluster_size: usize,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            plane_distance: 0.005,
            plane_iterations: 500,
            cluster_tolerance: 0.02,
            min_cluster_size: 50,
        }
    }
}

impl SegmentationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.plane_distance > 0.0 && self.plane_distance.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "plane_distance must be positive, got {}",
                self.plane_distance
            )));
        }
        if !(self.cluster_tolerance > 0.0 && self.cluster_tolerance.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "cluster_tolerance must be positive, got {}",
                self.cluster_tolerance
            )));
        }
        if self.plane_iterations == 0 {
            return Err(Error::InvalidInput("plane_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedScene {
    pub parts: Vec<PointCloud>,
    /// `None` when no dominant plane was found and subtraction was skipped.
    pub plane: Option<Plane>,
    /// Off-plane points not assigned to any kept cluster.
    pub residual_points: usize,
}

/// Result of plane removal: the plane, its inlier indices and the remaining points.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneRemoval {
    pub plane: Plane,
    pub inliers: Vec<usize>,
    pub off_plane: PointCloud,
}

fn plane_through(a: &Point, b: &Point, c: &Point) -> Option<Plane> {
    let n = (b - a).cross(&(c - a));
    let len = n.norm();
    if !(len > 1e-12) {
        return None;
    }
    let mut n = n / len;
    if n[n.iamax()] < 0.0 {
        n = -n;
    }
    Some(Plane {
        normal: n.into(),
        offset: -n.dot(a),
    })
}

/// RANSAC search for the plane with the most points within `dist_thresh`.
///
/// Hypotheses depend only on `seed` and the cloud, not on the threshold,
/// so the inlier count never decreases as the threshold grows.
pub fn remove_dominant_plane(scene: &PointCloud, dist_thresh: f64, iters: usize, seed: u64) -> Result<PlaneRemoval> {
    let pts = scene.points();
    if pts.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: pts.len(),
        });
    }
    if !(dist_thresh > 0.0) {
        return Err(Error::InvalidInput(format!(
            "plane distance threshold must be > 0, got {dist_thresh}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = pts.len();
    let mut best: Option<(usize, Plane)> = None;
    for _ in 0..iters.max(1) {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        let k = rng.random_range(0..n);
        if i == j || j == k || i == k {
            continue;
        }
        let Some(plane) = plane_through(&pts[i], &pts[j], &pts[k]) else {
            continue;
        };
        let count = pts
            .iter()
            .filter(|p| plane.signed_distance(p).abs() <= dist_thresh)
            .count();
        if best.as_ref().is_none_or(|(c, _)| count > *c) {
            best = Some((count, plane));
        }
    }
    let (count, plane) = best.unwrap_or((
        0,
        Plane {
            normal: [0.0, 0.0, 1.0],
            offset: 0.0,
        },
    ));
    let fraction = count as f64 / n as f64;
    if fraction < MIN_PLANE_FRACTION {
        return Err(Error::NoPlaneFound {
            best_fraction: fraction,
        });
    }
    let (inliers, outliers): (Vec<usize>, Vec<usize>) =
        (0..n).partition(|&i| plane.signed_distance(&pts[i]).abs() <= dist_thresh);
    Ok(PlaneRemoval {
        plane,
        inliers,
        off_plane: scene.subset(&outliers),
    })
}

/// Connected components under `distance < cluster_tol`, dropping clusters
/// smaller than `min_size`. Largest clusters come first; equal sizes are
/// ordered by centroid `(x, y, z)`. Points keep their input order.
pub fn cluster_parts(cloud: &PointCloud, cluster_tol: f64, min_size: usize) -> Result<Vec<PointCloud>> {
    Ok(cluster_indices(cloud, cluster_tol, min_size)?
        .iter()
        .map(|idx| cloud.subset(idx))
        .collect())
}

pub(crate) fn cluster_indices(cloud: &PointCloud, cluster_tol: f64, min_size: usize) -> Result<Vec<Vec<usize>>> {
    if !(cluster_tol > 0.0) {
        return Err(Error::InvalidInput(format!(
            "cluster tolerance must be > 0, got {cluster_tol}"
        )));
    }
    let pts = cloud.points();
    let tree = KdTree::new(pts);
    let mut label = vec![usize::MAX; pts.len()];
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for seed in 0..pts.len() {
        if label[seed] != usize::MAX {
            continue;
        }
        let id = clusters.len();
        label[seed] = id;
        let mut members = vec![seed];
        let mut frontier = vec![seed];
        while let Some(i) = frontier.pop() {
            for j in tree.within_radius(&pts[i], cluster_tol) {
                if label[j] == usize::MAX {
                    label[j] = id;
                    members.push(j);
                    frontier.push(j);
                }
            }
        }
        members.sort_unstable();
        clusters.push(members);
    }
    clusters.retain(|c| c.len() >= min_size.max(1));

    let centroid = |c: &Vec<usize>| c.iter().fold(Point::zeros(), |acc, &i| acc + pts[i]) / c.len() as f64;
    let mut keyed: Vec<(Point, Vec<usize>)> = clusters.into_iter().map(|c| (centroid(&c), c)).collect();
    keyed.sort_by(|(ca, a), (cb, b)| {
        b.len()
            .cmp(&a.len())
            .then(ca.x.total_cmp(&cb.x))
            .then(ca.y.total_cmp(&cb.y))
            .then(ca.z.total_cmp(&cb.z))
    });
    Ok(keyed.into_iter().map(|(_, c)| c).collect())
}

/// Plane removal (skipped when no dominant plane exists) followed by clustering.
pub fn segment_scene(scene: &PointCloud, config: &SegmentationConfig, seed: u64) -> Result<SegmentedScene> {
    let (plane, rest) = match remove_dominant_plane(scene, config.plane_distance, config.plane_iterations, seed) {
        Ok(r) => (Some(r.plane), r.off_plane),
        Err(Error::NoPlaneFound { .. }) => (None, scene.clone()),
        Err(e) => return Err(e),
    };
    let parts = cluster_parts(&rest, config.cluster_tolerance, config.min_cluster_size)?;
    let kept: usize = parts.iter().map(PointCloud::len).sum();
    Ok(SegmentedScene {
        residual_points: rest.len() - kept,
        parts: parts
            .into_iter()
            .enumerate()
            .map(|(i, p)| p.with_frame_id(format!("part{i}")))
            .collect(),
        plane,
    })
}

/// Loads reference components in order and scales them uniformly about
/// their joint centroid, so an assembled tool keeps its joints closed.
pub fn load_reference_components<P: AsRef<Path>>(paths: &[P], real_world_scale: f64) -> Result<Vec<PointCloud>> {
    if paths.is_empty() {
        return Err(Error::InvalidInput(
            "at least one reference component is required".into(),
        ));
    }
    if !(real_world_scale > 0.0 && real_world_scale.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "real-world scale must be > 0, got {real_world_scale}"
        )));
    }
    let clouds = paths.iter().map(load_ply).collect::<Result<Vec<_>>>()?;
    if real_world_scale == 1.0 {
        return Ok(clouds);
    }
    let mut sum = Point::zeros();
    let mut n = 0usize;
    for c in &clouds {
        c.ensure_non_empty()?;
        sum += c.points().iter().sum::<Point>();
        n += c.len();
    }
    let center = sum / n as f64;
    clouds
        .iter()
        .map(|c| c.scaled_about(&center, real_world_scale))
        .collect()
}
