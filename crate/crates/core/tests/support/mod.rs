//! Brute-force reference computations shared by the oracle tests and the
//! acceptance harness.

use rand::Rng;
use tcm_icp_core::lp::{LpProblem, Relation};
use tcm_icp_core::nalgebra::{DMatrix, DVector};
use tcm_icp_core::{Point3, PointCloud};

pub fn sq(a: &Point3, b: &Point3) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}

fn nn_sq(p: &Point3, cloud: &[Point3]) -> f64 {
    cloud.iter().map(|q| sq(p, q)).fold(f64::INFINITY, f64::min)
}

pub fn centroid(points: &[Point3]) -> Point3 {
    let mut s = [0.0; 3];
    for p in points {
        s[0] += p.x;
        s[1] += p.y;
        s[2] += p.z;
    }
    let n = points.len() as f64;
    Point3::new(s[0] / n, s[1] / n, s[2] / n)
}

fn min_pair_sq(points: &[Point3]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            best = best.min(sq(&points[i], &points[j]));
        }
    }
    best
}

/// `(τ, f·h)` by direct evaluation over all points and pairs.
pub fn tau_fh(a: &[Point3], b: &[Point3]) -> (f64, f64) {
    let f = nn_sq(&centroid(b), a) + nn_sq(&centroid(a), b);
    let g = (min_pair_sq(a) - min_pair_sq(b)).abs();
    let h = 1.0 / (a.len() as f64 * b.len() as f64);
    (f * g * h, f * h)
}

/// Symmetric mean nearest-neighbor distance over all points.
pub fn correspondence(a: &[Point3], b: &[Point3]) -> f64 {
    let mean = |x: &[Point3], y: &[Point3]| {
        x.iter().map(|p| nn_sq(p, y).sqrt()).sum::<f64>() / x.len() as f64
    };
    0.5 * (mean(a, b) + mean(b, a))
}

/// Candidate with least τ, ties broken by f·h, then correspondence, then
/// position.
pub fn argmin_tau(candidates: &[PointCloud], reference: &PointCloud) -> usize {
    let keys: Vec<(f64, f64)> = candidates
        .iter()
        .map(|c| tau_fh(c.points(), reference.points()))
        .collect();
    let best = keys
        .iter()
        .copied()
        .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)))
        .unwrap();
    let tied: Vec<usize> = (0..keys.len()).filter(|&i| keys[i] == best).collect();
    if tied.len() == 1 {
        return tied[0];
    }
    tied.into_iter()
        .map(|i| {
            (
                correspondence(candidates[i].points(), reference.points()),
                i,
            )
        })
        .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)))
        .unwrap()
        .1
}

/// A reference cloud and candidates, some of which are translated copies of
/// one another so that τ and f·h ties occur.
pub fn tau_instance(rng: &mut impl Rng) -> (PointCloud, Vec<PointCloud>) {
    let cloud = |rng: &mut dyn rand::RngCore, n: usize, spread: f64| {
        let pts = (0..n)
            .map(|_| {
                Point3::new(
                    rng.random_range(-spread..spread),
                    rng.random_range(-spread..spread),
                    rng.random_range(-spread..spread),
                )
            })
            .collect();
        PointCloud::new("c", pts).unwrap()
    };
    let n = rng.random_range(2..=100);
    let reference = cloud(rng, n, 5.0);
    let count = rng.random_range(1..=6);
    let mut candidates: Vec<PointCloud> = Vec::with_capacity(count);
    for _ in 0..count {
        let c = match rng.random_range(0..3) {
            0 if !candidates.is_empty() => {
                let i = rng.random_range(0..candidates.len());
                let d = [rng.random_range(-3.0..3.0), 0.0, 0.0];
                let moved = candidates[i]
                    .points()
                    .iter()
                    .map(|p| Point3::new(p.x + d[0], p.y, p.z))
                    .collect();
                PointCloud::new("c", moved).unwrap()
            }
            1 => {
                // Same spacing as the reference, so g and τ vanish.
                let d = rng.random_range(-4.0..4.0);
                let moved = reference
                    .points()
                    .iter()
                    .map(|p| Point3::new(p.x + d, p.y - d, p.z))
                    .collect();
                PointCloud::new("c", moved).unwrap()
            }
            _ => {
                let n = rng.random_range(2..=100);
                let spread = rng.random_range(1.0..8.0);
                cloud(rng, n, spread)
            }
        };
        candidates.push(c);
    }
    (reference, candidates)
}

/// Root mean squared nearest-neighbor distance from every point of `a` to `b`.
pub fn rms(a: &[Point3], b: &[Point3]) -> f64 {
    (a.iter().map(|p| nn_sq(p, b)).sum::<f64>() / a.len() as f64).sqrt()
}

/// Mean and population standard deviation of nearest-neighbor distances.
pub fn c2c(a: &[Point3], b: &[Point3]) -> (f64, f64) {
    let d: Vec<f64> = a.iter().map(|p| nn_sq(p, b).sqrt()).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Random bounded LP with at most `max_vars` variables and `max_rows` rows.
/// The first row has positive coefficients, which bounds the feasible set.
pub fn random_lp(rng: &mut impl Rng, max_vars: usize, max_rows: usize) -> LpProblem {
    let n = rng.random_range(1..=max_vars);
    let m = rng.random_range(1..=max_rows);
    let objective: Vec<f64> = (0..n)
        .map(|_| rng.random_range(-5.0..5.0f64).round())
        .collect();
    let mut p = LpProblem::new(objective);
    for r in 0..m {
        if r == 0 {
            let coeffs = (0..n)
                .map(|_| rng.random_range(1.0..5.0f64).round())
                .collect();
            p.add_constraint(coeffs, Relation::Le, rng.random_range(5.0..20.0f64).round());
            continue;
        }
        let coeffs: Vec<f64> = (0..n)
            .map(|_| rng.random_range(-4.0..4.0f64).round())
            .collect();
        let (relation, rhs) = match rng.random_range(0..6) {
            0 => (Relation::Ge, rng.random_range(0.0..3.0f64).round()),
            1 => (Relation::Eq, rng.random_range(0.0..4.0f64).round()),
            _ => (Relation::Le, rng.random_range(-2.0..10.0f64).round()),
        };
        p.add_constraint(coeffs, relation, rhs);
    }
    p
}

fn combinations(
    n: usize,
    k: usize,
    start: usize,
    current: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if current.len() == k {
        out.push(current.clone());
        return;
    }
    for i in start..n {
        current.push(i);
        combinations(n, k, i + 1, current, out);
        current.pop();
    }
}

/// Optimal objective of a bounded LP by enumerating basic solutions: every
/// choice of `n` tight hyperplanes among the rows and `x ≥ 0` bounds.
/// `None` when no basic solution is feasible.
pub fn vertex_optimum(p: &LpProblem) -> Option<f64> {
    let n = p.num_vars();
    let rows = p.constraints();
    let mut planes: Vec<(Vec<f64>, f64)> = rows.iter().map(|c| (c.coeffs.clone(), c.rhs)).collect();
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        planes.push((e, 0.0));
    }
    let mut subsets = Vec::new();
    combinations(planes.len(), n, 0, &mut Vec::new(), &mut subsets);
    let mut best: Option<f64> = None;
    for s in subsets {
        let a = DMatrix::from_fn(n, n, |r, c| planes[s[r]].0[c]);
        let b = DVector::from_fn(n, |r, _| planes[s[r]].1);
        let Some(x) = a.lu().solve(&b) else { continue };
        let x: Vec<f64> = x.iter().copied().collect();
        if x.iter().any(|v| !v.is_finite()) || !p.is_feasible(&x, 1e-9) {
            continue;
        }
        let v = p.evaluate(&x);
        best = Some(best.map_or(v, |b: f64| b.min(v)));
    }
    best
}
