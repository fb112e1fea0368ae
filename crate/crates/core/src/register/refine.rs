//! Pattern search over the six rigid parameters with an annealing acceptance
//! rule.
//!
//! Every round scores all `3⁶ − 1` combinations of `{−δ, 0, +δ}` steps around
//! the current point and moves to the best one. A best neighbor that is worse
//! than the current point is still taken with probability `exp(−Δ / T)`,
//! where `Δ` is measured in percent of the starting objective. When nothing is
//! taken the step sizes halve. The lowest-objective point ever visited is
//! returned.
//!
//! The point-to-plane objective scores a round's candidates against the
//! planes matched at the current point, then rescores the point it moves to
//! with fresh matches.

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{RefineObjective, RegisterConfig};
use crate::geom::{centroid, closest_pair_sq, dist_sq, Point3, PointCloud, RigidTransform};
use crate::kdtree::KdTree;
use crate::lp::omega_to_rotation;

#[derive(Debug, Clone, PartialEq)]
pub struct RefineOutcome {
    pub transform: RigidTransform,
    pub initial_objective: f64,
    pub objective: f64,
    pub rounds: usize,
    pub evaluations: usize,
}

struct Objective {
    kind: RefineObjective,
    source: Vec<Point3>,
    target: Vec<Point3>,
    target_tree: KdTree,
    target_centroid: Point3,
    /// `g · h` for τ; both are invariant under rigid motion of the source.
    gh: f64,
    reject_factor: f64,
    /// Last neighbor found for each source point; candidates move points only
    /// a little, so these make good search seeds.
    hints: Vec<usize>,
    /// Point-to-plane truncation distance, fixed by `set_cap`.
    cap: f64,
    /// Neighbor search radius, fixed by `set_cap`.
    search_radius: f64,
    /// Unit normals of target points, computed on first use.
    normals: Vec<Option<Vector3<f64>>>,
    /// Per source point, the target point and normal it was last bound to.
    bound: Vec<Option<(Point3, Vector3<f64>)>>,
}

impl Objective {
    fn new(source: &PointCloud, target: &PointCloud, cfg: &RegisterConfig) -> Self {
        let s = source.subsample(cfg.refine_points, cfg.rng_seed);
        let t = target.subsample(cfg.refine_points, cfg.rng_seed.wrapping_add(1));
        let gh = if cfg.refine_objective == RefineObjective::Tcm && s.len() >= 2 && t.len() >= 2 {
            let g = (closest_pair_sq(&s).unwrap() - closest_pair_sq(&t).unwrap()).abs();
            g / ((s.len() as f64) * (t.len() as f64))
        } else {
            0.0
        };
        // The trimmed distance queries the full target; a sparse target
        // sample inflates every distance and flattens the minimum.
        let tree_points = match cfg.refine_objective {
            RefineObjective::Tcm => t.points(),
            RefineObjective::TruncatedNn => target.points(),
        };
        Self {
            kind: cfg.refine_objective,
            target_tree: KdTree::new(tree_points),
            target_centroid: t.centroid(),
            source: s.into_points(),
            target: t.into_points(),
            gh,
            reject_factor: cfg.pair_reject_factor,
            hints: Vec::new(),
            cap: f64::INFINITY,
            search_radius: f64::INFINITY,
            normals: Vec::new(),
            bound: Vec::new(),
        }
    }

    fn eval(&mut self, t: &RigidTransform) -> f64 {
        match self.kind {
            RefineObjective::Tcm => {
                let moved_centroid = t.apply(&centroid(&self.source));
                let x = self
                    .source
                    .iter()
                    .map(|p| dist_sq(&t.apply(p), &self.target_centroid))
                    .fold(f64::INFINITY, f64::min);
                let y = self
                    .target
                    .iter()
                    .map(|q| dist_sq(q, &moved_centroid))
                    .fold(f64::INFINITY, f64::min);
                (x + y) * self.gh
            }
            RefineObjective::TruncatedNn => {
                self.bind(t);
                self.eval_bound(t)
            }
        }
    }

    /// Fixes the tangent plane each source point is scored against to the one
    /// at its nearest target point under `t`. Only the point-to-plane form
    /// binds; the others recompute everything on each evaluation.
    fn bind(&mut self, t: &RigidTransform) {
        if self.kind != RefineObjective::TruncatedNn {
            return;
        }
        self.hints.resize(self.source.len(), usize::MAX);
        self.bound.clear();
        let r2 = self.search_radius * self.search_radius;
        for k in 0..self.source.len() {
            let p = t.apply(&self.source[k]);
            let plane = self
                .target_tree
                .nearest_within(&p, r2, self.hints[k])
                .map(|(i, _)| {
                    self.hints[k] = i;
                    (*self.target_tree.point(i), self.normal(i))
                });
            self.bound.push(plane);
        }
    }

    /// The objective at `t` with the planes from the last `bind`.
    fn eval_bound(&mut self, t: &RigidTransform) -> f64 {
        if self.kind != RefineObjective::TruncatedNn {
            return self.eval(t);
        }
        let sum: f64 = self
            .source
            .iter()
            .zip(&self.bound)
            .map(|(p, plane)| match plane {
                Some((q, n)) => n.dot(&(t.apply(p) - q)).abs().min(self.cap),
                None => self.cap,
            })
            .sum();
        sum / self.source.len().max(1) as f64
    }

    /// Normal of the plane fitted to the neighborhood of target point `i`.
    fn normal(&mut self, i: usize) -> Vector3<f64> {
        if self.normals.is_empty() {
            self.normals = vec![None; self.target_tree.len()];
        }
        if let Some(n) = self.normals[i] {
            return n;
        }
        let neighbors = self
            .target_tree
            .k_nearest(self.target_tree.point(i), NORMAL_NEIGHBORS);
        let pts: Vec<Point3> = neighbors
            .iter()
            .map(|&(j, _)| *self.target_tree.point(j))
            .collect();
        let c = centroid(&pts);
        let mut cov = Matrix3::zeros();
        for p in &pts {
            let d = p - c;
            cov += d * d.transpose();
        }
        let eig = cov.symmetric_eigen();
        let (k, _) = eig.eigenvalues.argmin();
        let n = eig.eigenvectors.column(k).into_owned();
        self.normals[i] = Some(n);
        n
    }

    /// The truncation is
    /// `pair_reject_factor` times the median point-to-plane distance at `t`,
    /// and the search radius a multiple of the point-to-point one, both
    /// floored at `floor`.
    fn set_cap(&mut self, t: &RigidTransform, floor: f64) {
        if self.kind == RefineObjective::TruncatedNn && !self.source.is_empty() {
            let mut point = Vec::with_capacity(self.source.len());
            let mut plane = Vec::with_capacity(self.source.len());
            for k in 0..self.source.len() {
                let p = t.apply(&self.source[k]);
                let (i, d2) = self.target_tree.nearest(&p).expect("non-empty");
                point.push(d2.sqrt());
                let q = *self.target_tree.point(i);
                plane.push(self.normal(i).dot(&(p - q)).abs());
            }
            self.search_radius = SEARCH_FACTOR * self.reject_factor * median(&mut point).max(floor);
            self.cap = self.reject_factor * median(&mut plane).max(floor);
        }
    }
}

/// Neighbors used to fit each target normal.
const NORMAL_NEIGHBORS: usize = 10;
/// Neighbor search radius as a multiple of the initial pair rejection distance.
const SEARCH_FACTOR: f64 = 1.5;

fn median(values: &mut [f64]) -> f64 {
    let n = values.len();
    let mid = n / 2;
    let (lower, m, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    if n.is_multiple_of(2) {
        let below = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (*m + below)
    } else {
        *m
    }
}

/// All non-zero vectors in `{−1, 0, 1}⁶`, in lexicographic order.
fn stencil() -> Vec<[i8; 6]> {
    let mut out = Vec::with_capacity(728);
    for code in 0..729u32 {
        let mut c = code;
        let mut v = [0i8; 6];
        for slot in v.iter_mut().rev() {
            *slot = (c % 3) as i8 - 1;
            c /= 3;
        }
        if v != [0; 6] {
            out.push(v);
        }
    }
    out
}

/// `step(params) ∘ init`, rotating about `pivot`.
fn candidate(init: &RigidTransform, pivot: &Point3, params: &[f64; 6]) -> RigidTransform {
    let omega = Vector3::new(params[0], params[1], params[2]);
    let r = omega_to_rotation(&omega);
    let t = Vector3::new(params[3], params[4], params[5]);
    RigidTransform::new_unchecked(r, pivot.coords + t - r * pivot.coords).compose(init)
}

pub fn refine(
    source: &PointCloud,
    target: &PointCloud,
    init: &RigidTransform,
    cfg: &RegisterConfig,
) -> RigidTransform {
    refine_detailed(source, target, init, cfg).transform
}

pub fn refine_detailed(
    source: &PointCloud,
    target: &PointCloud,
    init: &RigidTransform,
    cfg: &RegisterConfig,
) -> RefineOutcome {
    let mut objective = Objective::new(source, target, cfg);
    objective.set_cap(init, 1e-3 * target.aabb().diagonal());
    let initial_objective = objective.eval(init);
    let mut outcome = RefineOutcome {
        transform: *init,
        initial_objective,
        objective: initial_objective,
        rounds: 0,
        evaluations: 1,
    };
    if cfg.refine_rounds == 0 {
        return outcome;
    }

    let pivot = init.apply(&centroid(&objective.source));
    let mut delta_rot = cfg.refine_delta;
    let mut delta_trans =
        cfg.refine_delta_trans_frac * target.aabb().diagonal().max(f64::MIN_POSITIVE);
    // Temperatures are in percent of the starting objective.
    let scale = if initial_objective > 0.0 {
        initial_objective / 100.0
    } else {
        1.0
    };
    let mut temperature = cfg.anneal_t0;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed ^ 0x0005_eed0_fa11);
    let moves = stencil();

    let mut current = [0.0f64; 6];
    let mut current_obj = initial_objective;

    while outcome.rounds < cfg.refine_rounds && delta_rot >= cfg.convergence_eps {
        outcome.rounds += 1;
        let mut best: Option<([f64; 6], f64)> = None;
        for m in &moves {
            let mut p = current;
            for k in 0..3 {
                p[k] += m[k] as f64 * delta_rot;
                p[k + 3] += m[k + 3] as f64 * delta_trans;
            }
            let value = objective.eval_bound(&candidate(init, &pivot, &p));
            outcome.evaluations += 1;
            if best.is_none_or(|(_, b)| value < b) {
                best = Some((p, value));
            }
        }
        let (p, value) = best.expect("stencil is non-empty");
        let accept = if value < current_obj {
            true
        } else if temperature > 0.0 {
            let d = (value - current_obj) / scale;
            rng.random::<f64>() < (-d / temperature).exp()
        } else {
            false
        };
        if accept {
            current = p;
            let t = candidate(init, &pivot, &p);
            current_obj = objective.eval(&t);
            outcome.evaluations += 1;
            if current_obj < outcome.objective {
                outcome.objective = current_obj;
                outcome.transform = t;
            }
        } else {
            delta_rot *= 0.5;
            delta_trans *= 0.5;
        }
        temperature *= cfg.anneal_cooling;
    }
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stencil_has_all_nonzero_moves() {
        let s = stencil();
        assert_eq!(s.len(), 728);
        assert_eq!(s[0], [-1; 6]);
        assert_eq!(s[727], [1; 6]);
    }

    #[test]
    fn zero_parameters_reproduce_init() {
        let init = RigidTransform::from_axis_angle(
            Vector3::new(0.1, 0.0, -0.2),
            Vector3::new(1.0, 2.0, 3.0),
        );
        let c = candidate(&init, &Point3::new(4.0, 5.0, 6.0), &[0.0; 6]);
        assert!((c.rotation() - init.rotation()).amax() < 1e-15);
        assert!((c.translation() - init.translation()).amax() < 1e-12);
    }
}
