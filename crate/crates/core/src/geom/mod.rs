//! Point clouds, rigid transforms, principal frames, exact nearest pairs and PLY I/O.

mod cloud;
pub mod kdtree;
mod pca;
mod ply;
mod transform;

pub use cloud::{Point, PointCloud};
pub use kdtree::KdTree;
pub use pca::{pca_frame, PcaFrame};
pub use ply::{load_ply, ply_string, save_ply};
pub use transform::{transform_cloud, RigidTransform};

use crate::error::{Error, Result};

/// One cross-cloud pair returned by [`closest_pairs`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointPair {
    pub index_a: usize,
    pub index_b: usize,
    pub a: Point,
    pub b: Point,
    pub distance: f64,
}

/// The `k` cross-cloud pairs with the smallest Euclidean distance, ascending,
/// ties broken by `(index_a, index_b)`. `k` is clipped to `|a|·|b|`.
pub fn closest_pairs(a: &PointCloud, b: &PointCloud, k: usize) -> Result<Vec<PointPair>> {
    a.ensure_non_empty()?;
    b.ensure_non_empty()?;
    if k == 0 {
        return Err(Error::InvalidInput("closest_pairs needs k >= 1".into()));
    }
    let tree = KdTree::new(b.points());
    Ok(closest_pairs_with(&tree, a.points(), |p| *p, k))
}

/// Same as [`closest_pairs`] against a prebuilt tree, with each query point
/// first mapped through `map` (lets callers reuse one tree across rigid moves).
pub(crate) fn closest_pairs_with<F>(tree: &KdTree, a: &[Point], map: F, k: usize) -> Vec<PointPair>
where
    F: Fn(&Point) -> Point,
{
    let k = k.min(a.len().saturating_mul(tree.points().len()));
    kdtree::k_closest_pairs(tree, a.len(), |i| map(&a[i]), k)
        .into_iter()
        .map(|c| PointPair {
            index_a: c.ia,
            index_b: c.ib,
            a: map(&a[c.ia]),
            b: tree.points()[c.ib],
            distance: c.d2.sqrt(),
        })
        .collect()
}
