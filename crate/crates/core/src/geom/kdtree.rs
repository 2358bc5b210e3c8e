//! Static 3D k-d tree with exact queries.
//!
//! Results are keyed by `(squared distance, index)` so ties resolve the same
//! way a sorted brute-force scan would.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::cloud::Point;

const LEAF_SIZE: usize = 8;

#[derive(Debug)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

#[derive(Debug)]
pub struct KdTree {
    points: Vec<Point>,
    order: Vec<usize>,
    root: Node,
}

impl KdTree {
    pub fn new(points: &[Point]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let root = build(points, &mut order, 0);
        Self {
            points: points.to_vec(),
            order,
            root,
        }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Indices of all points with `|p - q| < radius`, ascending.
    pub fn within_radius(&self, q: &Point, radius: f64) -> Vec<usize> {
        let r2 = radius * radius;
        let mut out = Vec::new();
        self.radius_rec(&self.root, q, r2, &mut out);
        out.sort_unstable();
        out
    }

    fn radius_rec(&self, node: &Node, q: &Point, r2: f64, out: &mut Vec<usize>) {
        match node {
            Node::Leaf { start, end } => {
                for &i in &self.order[*start..*end] {
                    if (self.points[i] - q).norm_squared() < r2 {
                        out.push(i);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[*axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.radius_rec(near, q, r2, out);
                if diff * diff < r2 {
                    self.radius_rec(far, q, r2, out);
                }
            }
        }
    }

    /// The `k` nearest points to `q` as `(squared distance, index)`, ascending.
    pub fn nearest_k(&self, q: &Point, k: usize) -> Vec<(f64, usize)> {
        let mut heap = BinaryHeap::with_capacity(k + 1);
        if k > 0 {
            self.knn_rec(&self.root, q, k, 0, &mut heap);
        }
        let mut v: Vec<_> = heap.into_iter().map(|c: Candidate| (c.d2, c.ib)).collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        v
    }

    /// Offers every point in the tree to `heap` as a pair partner of query
    /// point `ia`, keeping only the `k` smallest `(d2, ia, ib)` keys.
    fn knn_rec(&self, node: &Node, q: &Point, k: usize, ia: usize, heap: &mut BinaryHeap<Candidate>) {
        match node {
            Node::Leaf { start, end } => {
                for &ib in &self.order[*start..*end] {
                    let cand = Candidate {
                        d2: (self.points[ib] - q).norm_squared(),
                        ia,
                        ib,
                    };
                    offer(heap, k, cand);
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[*axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.knn_rec(near, q, k, ia, heap);
                if heap.len() < k || diff * diff <= heap.peek().map_or(f64::INFINITY, |c| c.d2) {
                    self.knn_rec(far, q, k, ia, heap);
                }
            }
        }
    }
}

fn offer(heap: &mut BinaryHeap<Candidate>, k: usize, cand: Candidate) {
    if heap.len() < k {
        heap.push(cand);
    } else if let Some(worst) = heap.peek() {
        if cand < *worst {
            heap.pop();
            heap.push(cand);
        }
    }
}

fn build(points: &[Point], order: &mut [usize], offset: usize) -> Node {
    if order.len() <= LEAF_SIZE {
        return Node::Leaf {
            start: offset,
            end: offset + order.len(),
        };
    }
    let mut lo = points[order[0]];
    let mut hi = lo;
    for &i in order.iter() {
        lo = lo.inf(&points[i]);
        hi = hi.sup(&points[i]);
    }
    let spread = hi - lo;
    let axis = spread.imax();
    if spread[axis] <= 0.0 {
        // All points coincide.
        return Node::Leaf {
            start: offset,
            end: offset + order.len(),
        };
    }
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b))
    });
    let value = points[order[mid]][axis];
    let (l, r) = order.split_at_mut(mid);
    Node::Split {
        axis,
        value,
        left: Box::new(build(points, l, offset)),
        right: Box::new(build(points, r, offset + mid)),
    }
}

/// Heap entry ordered by `(d2, ia, ib)`; the max-heap keeps the worst on top.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Candidate {
    pub d2: f64,
    pub ia: usize,
    pub ib: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2
            .total_cmp(&other.d2)
            .then(self.ia.cmp(&other.ia))
            .then(self.ib.cmp(&other.ib))
    }
}

/// Global `k` closest cross pairs between `queries` and the tree's points,
/// sorted by `(d2, query index, tree index)`.
pub(crate) fn k_closest_pairs<F>(tree: &KdTree, n_queries: usize, query: F, k: usize) -> Vec<Candidate>
where
    F: Fn(usize) -> Point,
{
    let mut heap = BinaryHeap::with_capacity(k + 1);
    if k == 0 {
        return Vec::new();
    }
    for ia in 0..n_queries {
        let q = query(ia);
        tree.knn_rec(&tree.root, &q, k, ia, &mut heap);
    }
    heap.into_sorted_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, seed: u64) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Point::new(rng.random(), rng.random(), rng.random()))
            .collect()
    }

    #[test]
    fn knn_matches_brute_force() {
        let pts = random_points(700, 2);
        let tree = KdTree::new(&pts);
        let qs = random_points(50, 3);
        for q in &qs {
            let got = tree.nearest_k(q, 7);
            let mut all: Vec<_> = pts
                .iter()
                .enumerate()
                .map(|(i, p)| ((p - q).norm_squared(), i))
                .collect();
            all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            all.truncate(7);
            assert_eq!(got, all);
        }
    }

    #[test]
    fn radius_matches_brute_force() {
        let pts = random_points(500, 5);
        let tree = KdTree::new(&pts);
        let q = Point::new(0.5, 0.5, 0.5);
        let got = tree.within_radius(&q, 0.2);
        let want: Vec<_> = (0..pts.len()).filter(|&i| (pts[i] - q).norm() < 0.2).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn duplicate_points_tie_break_by_index() {
        let pts = vec![Point::new(1.0, 0.0, 0.0); 20];
        let tree = KdTree::new(&pts);
        let got = tree.nearest_k(&Point::zeros(), 3);
        assert_eq!(got.iter().map(|x| x.1).collect::<Vec<_>>(), vec![0, 1, 2]);
    }
}
