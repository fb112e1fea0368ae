//! Coarse initial alignment by translation voting.
//!
//! For each rotation on a grid of axis-angle vectors, every difference
//! between a target sample and a rotated source sample votes for a
//! translation bin. A correct rotation makes the votes of overlapping points
//! pile up in one bin, while wrong ones spread them out. The strongest peaks
//! become starting points for the LP iterations.

use nalgebra::Vector3;

use super::{kabsch, RegisterConfig};
use crate::geom::{centroid, Point3, PointCloud, RigidTransform};
use crate::kdtree::KdTree;
use crate::lp::omega_to_rotation;

const SOURCE_SAMPLES: usize = 96;
const TARGET_SAMPLES: usize = 512;
const PEAKS_PER_ROTATION: usize = 8;
const VERIFY_SAMPLES: usize = 96;
const POLISHED: usize = 48;
const POLISH_SAMPLES: usize = 200;
const POLISH_ITERS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct CoarseCandidate {
    pub transform: RigidTransform,
    /// Votes in the 2×2×2 block of bins the candidate came from.
    pub votes: u32,
}

fn rotation_grid(max_deg: f64, step_deg: f64) -> Vec<Vector3<f64>> {
    let m = (max_deg / step_deg).floor() as i32;
    let step = step_deg.to_radians();
    let limit = (max_deg + 0.5 * step_deg).to_radians();
    let mut out = Vec::new();
    for i in -m..=m {
        for j in -m..=m {
            for k in -m..=m {
                let w = Vector3::new(i as f64, j as f64, k as f64) * step;
                if w.norm() <= limit {
                    out.push(w);
                }
            }
        }
    }
    out
}

struct Grid {
    n: usize,
    bin: f64,
    half: f64,
    counts: Vec<u32>,
}

impl Grid {
    fn cell(&self, t: &Vector3<f64>) -> Option<[usize; 3]> {
        let mut c = [0usize; 3];
        for a in 0..3 {
            let f = ((t[a] + self.half) / self.bin).floor();
            if !(f >= 0.0 && f < self.n as f64) {
                return None;
            }
            c[a] = f as usize;
        }
        Some(c)
    }

    fn index(&self, c: [usize; 3]) -> usize {
        (c[0] * self.n + c[1]) * self.n + c[2]
    }

    /// The `k` highest 2×2×2 block sums with their lowest corners, at least
    /// two bins apart; earlier blocks win ties.
    fn peaks(&self, k: usize, sums: &mut Vec<u32>) -> Vec<(u32, [usize; 3])> {
        let n = self.n;
        let span = n.saturating_sub(1).max(1);
        let w = 2.min(n);
        sums.clear();
        for x in 0..span {
            for y in 0..span {
                for z in 0..span {
                    let mut sum = 0;
                    for dx in 0..w {
                        for dy in 0..w {
                            for dz in 0..w {
                                sum += self.counts[self.index([x + dx, y + dy, z + dz])];
                            }
                        }
                    }
                    sums.push(sum);
                }
            }
        }
        let mut out: Vec<(u32, [usize; 3])> = Vec::with_capacity(k);
        while out.len() < k {
            let mut best: Option<(u32, usize)> = None;
            for (i, &v) in sums.iter().enumerate() {
                if v > 0 && best.is_none_or(|(b, _)| v > b) {
                    best = Some((v, i));
                }
            }
            let Some((v, i)) = best else { break };
            let corner = [i / (span * span), (i / span) % span, i % span];
            out.push((v, corner));
            // Suppress the neighborhood.
            for x in corner[0].saturating_sub(2)..(corner[0] + 3).min(span) {
                for y in corner[1].saturating_sub(2)..(corner[1] + 3).min(span) {
                    for z in corner[2].saturating_sub(2)..(corner[2] + 3).min(span) {
                        sums[(x * span + y) * span + z] = 0;
                    }
                }
            }
        }
        out
    }
}

/// Up to `cfg.coarse_candidates` distinct starting transforms, strongest
/// first. Empty when either cloud is empty.
pub fn coarse_candidates(
    source: &PointCloud,
    target: &PointCloud,
    cfg: &RegisterConfig,
) -> Vec<CoarseCandidate> {
    let diameter = source.aabb().diagonal().max(target.aabb().diagonal());
    if cfg.coarse_candidates == 0 || !(diameter > 0.0) {
        return Vec::new();
    }
    let src = source.subsample(SOURCE_SAMPLES, cfg.rng_seed);
    let tgt = target.subsample(TARGET_SAMPLES, cfg.rng_seed.wrapping_add(1));
    let c = centroid(src.points());
    let bin = diameter / cfg.coarse_bins as f64;
    let half = cfg.coarse_max_translation_frac * diameter;
    let n = ((2.0 * half / bin).ceil() as usize).max(1);
    let mut grid = Grid {
        n,
        bin,
        half,
        counts: vec![0; n * n * n],
    };
    let rotations = rotation_grid(cfg.coarse_max_rotation_deg, cfg.coarse_rotation_step_deg);

    let moved_by = |w: &Vector3<f64>| -> Vec<Point3> {
        let r = omega_to_rotation(w);
        src.points().iter().map(|p| c + r * (p - c)).collect()
    };

    // Hypotheses: (rotation index, block corner, votes).
    let mut hypotheses: Vec<(usize, [usize; 3], u32)> = Vec::new();
    let mut sums = Vec::new();
    for (ri, w) in rotations.iter().enumerate() {
        grid.counts.iter_mut().for_each(|v| *v = 0);
        for m in moved_by(w) {
            for q in tgt.points() {
                if let Some(cell) = grid.cell(&(q - m)) {
                    let i = grid.index(cell);
                    grid.counts[i] += 1;
                }
            }
        }
        for (votes, corner) in grid.peaks(PEAKS_PER_ROTATION, &mut sums) {
            hypotheses.push((ri, corner, votes));
        }
    }

    // Screen every hypothesis against the full target: mean neighbor
    // distance of a source sample, truncated at one bin.
    let tree = KdTree::new(target.points());
    let screen = src.subsample(VERIFY_SAMPLES, cfg.rng_seed.wrapping_add(2));
    let truncated = |t: &RigidTransform, pts: &[Point3], cap: f64| -> f64 {
        pts.iter()
            .map(|p| {
                tree.nearest_within(&t.apply(p), cap * cap, usize::MAX)
                    .map_or(cap, |(_, d2)| d2.sqrt())
            })
            .sum::<f64>()
            / pts.len() as f64
    };
    let mut scored: Vec<(f64, RigidTransform, u32)> = hypotheses
        .into_iter()
        .map(|(ri, corner, votes)| {
            let r = omega_to_rotation(&rotations[ri]);
            let t = Vector3::from(corner.map(|v| (v as f64 + 1.0) * bin - half));
            let transform = RigidTransform::new_unchecked(r, c.coords + t - r * c.coords);
            (
                truncated(&transform, screen.points(), bin),
                transform,
                votes,
            )
        })
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    scored.truncate(POLISHED);

    // Polish the survivors with a few trimmed point-to-point steps and rank
    // them again with a cap near the point spacing.
    let polish = source.subsample(POLISH_SAMPLES, cfg.rng_seed.wrapping_add(3));
    let spacing = median_spacing(&tree, &tgt);
    let mut polished: Vec<(f64, RigidTransform, u32)> = scored
        .into_iter()
        .map(|(_, t, votes)| {
            let t = polish_icp(&tree, polish.points(), t, cfg.pair_reject_factor);
            (truncated(&t, polish.points(), 2.0 * spacing), t, votes)
        })
        .collect();
    polished.sort_by(|a, b| a.0.total_cmp(&b.0));

    let step = cfg.coarse_rotation_step_deg.to_radians();
    let mut out: Vec<CoarseCandidate> = Vec::new();
    for (_, transform, votes) in polished {
        if out.len() >= cfg.coarse_candidates {
            break;
        }
        let duplicate = out.iter().any(|o| {
            let rel = o.transform.inverse().compose(&transform);
            rel.rotation_angle() < 0.5 * step
                && (o.transform.apply(&c) - transform.apply(&c)).norm() < bin
        });
        if !duplicate {
            out.push(CoarseCandidate { transform, votes });
        }
    }
    out
}

/// Median distance from target sample points to their nearest other target point.
pub(super) fn median_spacing(tree: &KdTree, sample: &PointCloud) -> f64 {
    let mut d: Vec<f64> = sample
        .points()
        .iter()
        .filter_map(|p| {
            let (i, _) = tree.nearest(p)?;
            tree.nearest_except(p, i).map(|(_, d2)| d2.sqrt())
        })
        .collect();
    if d.is_empty() {
        return 0.0;
    }
    let mid = d.len() / 2;
    *d.select_nth_unstable_by(mid, f64::total_cmp).1
}

fn polish_icp(
    tree: &KdTree,
    pts: &[Point3],
    mut t: RigidTransform,
    reject_factor: f64,
) -> RigidTransform {
    for _ in 0..POLISH_ITERS {
        let mut pairs: Vec<(Point3, Point3, f64)> = pts
            .iter()
            .filter_map(|p| {
                let (i, d2) = tree.nearest(&t.apply(p))?;
                Some((*p, *tree.point(i), d2))
            })
            .collect();
        let mut d2: Vec<f64> = pairs.iter().map(|x| x.2).collect();
        let mid = d2.len() / 2;
        let median = *d2.select_nth_unstable_by(mid, f64::total_cmp).1;
        let limit = reject_factor * reject_factor * median;
        pairs.retain(|x| x.2 <= limit);
        let pairs: Vec<(Point3, Point3)> = pairs.into_iter().map(|(s, d, _)| (s, d)).collect();
        match kabsch(&pairs) {
            Ok(next) => t = next,
            Err(_) => break,
        }
    }
    t
}
