//! Exact, immutable KD-tree over 3D points.
//!
//! Each node splits its points at the median along their widest axis and
//! stops at `leaf_size` points. Queries return the lowest point index among
//! equidistant candidates, so results match a linear scan exactly.

use crate::geom::{dist_sq, Point3};

pub const DEFAULT_LEAF_SIZE: usize = 12;

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Point3>,
    /// Point indices permuted so every leaf covers a contiguous range.
    order: Vec<usize>,
    /// `points` in `order`, for cache-friendly leaf scans.
    packed: Vec<Point3>,
    nodes: Vec<Node>,
    leaf_size: usize,
}

impl KdTree {
    pub fn new(points: &[Point3]) -> Self {
        Self::with_leaf_size(points, DEFAULT_LEAF_SIZE)
    }

    pub fn with_leaf_size(points: &[Point3], leaf_size: usize) -> Self {
        let leaf_size = leaf_size.max(1);
        let mut tree = KdTree {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            packed: Vec::new(),
            nodes: Vec::with_capacity(2 * points.len() / leaf_size + 1),
            leaf_size,
        };
        if !points.is_empty() {
            tree.build(0, points.len());
        }
        tree.packed = tree.order.iter().map(|&i| tree.points[i]).collect();
        tree
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= self.leaf_size {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.order[start..end] {
            for a in 0..3 {
                lo[a] = lo[a].min(self.points[i][a]);
                hi[a] = hi[a].max(self.points[i][a]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap_or(0);
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a][axis].total_cmp(&points[b][axis])
        });
        let value = self.points[self.order[mid]][axis];
        self.nodes.push(Node::Leaf { start, end }); // placeholder
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn leaf_size(&self) -> usize {
        self.leaf_size
    }

    pub fn point(&self, index: usize) -> &Point3 {
        &self.points[index]
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    /// Index and squared distance of the point closest to `q`.
    pub fn nearest(&self, q: &Point3) -> Option<(usize, f64)> {
        self.nearest_filtered(q, usize::MAX, None)
    }

    /// Like [`nearest`](Self::nearest) but never returns `skip`. Used for
    /// nearest-other-point queries where `q` is itself a tree point.
    pub fn nearest_except(&self, q: &Point3, skip: usize) -> Option<(usize, f64)> {
        self.nearest_filtered(q, skip, None)
    }

    /// Same result as [`nearest`](Self::nearest), seeded with a guess. A
    /// guess close to the answer lets the search prune most of the tree.
    pub fn nearest_from(&self, q: &Point3, hint: usize) -> Option<(usize, f64)> {
        self.nearest_filtered(q, usize::MAX, (hint < self.points.len()).then_some(hint))
    }

    /// Nearest point with squared distance at most `max_dist_sq`, if any,
    /// seeded with `hint` like [`nearest_from`](Self::nearest_from).
    pub fn nearest_within(
        &self,
        q: &Point3,
        max_dist_sq: f64,
        hint: usize,
    ) -> Option<(usize, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, max_dist_sq);
        if let Some(p) = self.points.get(hint) {
            let d = dist_sq(q, p);
            if d <= max_dist_sq {
                best = (hint, d);
            }
        }
        self.search(0, q, usize::MAX, &mut best);
        (best.0 != usize::MAX).then_some(best)
    }

    fn nearest_filtered(
        &self,
        q: &Point3,
        skip: usize,
        hint: Option<usize>,
    ) -> Option<(usize, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = match hint {
            Some(h) => (h, dist_sq(q, &self.points[h])),
            None => (usize::MAX, f64::INFINITY),
        };
        self.search(0, q, skip, &mut best);
        (best.0 != usize::MAX).then_some(best)
    }

    fn search(&self, node: usize, q: &Point3, skip: usize, best: &mut (usize, f64)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for (k, p) in self.packed[start..end].iter().enumerate() {
                    let d = dist_sq(q, p);
                    if d <= best.1 {
                        let i = self.order[start + k];
                        if i != skip && (d < best.1 || i < best.0) {
                            *best = (i, d);
                        }
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near, q, skip, best);
                // Equal distances must still be visited for the lowest-index tie rule.
                if diff * diff <= best.1 {
                    self.search(far, q, skip, best);
                }
            }
        }
    }

    /// The `k` points closest to `q` as `(index, squared distance)`, nearest
    /// first, ties broken by lower index.
    pub fn k_nearest(&self, q: &Point3, k: usize) -> Vec<(usize, f64)> {
        let mut out = Vec::with_capacity(k + 1);
        if k > 0 && !self.nodes.is_empty() {
            self.collect_k(0, q, k, &mut out);
        }
        out
    }

    fn collect_k(&self, node: usize, q: &Point3, k: usize, out: &mut Vec<(usize, f64)>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for (j, p) in self.packed[start..end].iter().enumerate() {
                    let d = dist_sq(q, p);
                    let i = self.order[start + j];
                    if out.len() == k && (d, i) >= (out[k - 1].1, out[k - 1].0) {
                        continue;
                    }
                    let at = out.partition_point(|&(oi, od)| (od, oi) < (d, i));
                    out.insert(at, (i, d));
                    out.truncate(k);
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.collect_k(near, q, k, out);
                if out.len() < k || diff * diff <= out[k - 1].1 {
                    self.collect_k(far, q, k, out);
                }
            }
        }
    }

    /// Indices of all points with squared distance to `q` at most `radius²`,
    /// in ascending index order.
    pub fn within_radius(&self, q: &Point3, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if !self.nodes.is_empty() {
            self.collect_radius(0, q, radius * radius, &mut out);
        }
        out.sort_unstable();
        out
    }

    fn collect_radius(&self, node: usize, q: &Point3, r2: f64, out: &mut Vec<usize>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                out.extend(
                    (start..end)
                        .filter(|&k| dist_sq(q, &self.packed[k]) <= r2)
                        .map(|k| self.order[k]),
                );
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                if diff <= 0.0 || diff * diff <= r2 {
                    self.collect_radius(left, q, r2, out);
                }
                if diff >= 0.0 || diff * diff <= r2 {
                    self.collect_radius(right, q, r2, out);
                }
            }
        }
    }
}
