use super::coarse::median_spacing;
use super::pairs::match_sampled;
use super::{coarse_candidates, PairAlignment, RegisterConfig};
use crate::error::{Error, Result};
use crate::geom::{centroid, sample_indices, Point3, PointCloud, RigidTransform};
use crate::kdtree::KdTree;
use crate::lp::{build_rigid_fit_lp, omega_to_rotation, rigid_fit_params, solve, LpStatus};

/// Iterated LP alignment of `source` onto `target`.
///
/// Each round re-matches the moved source against the target, solves the
/// linearized L1 fit, turns `ω` into an exact rotation and composes the step
/// into the running transform. Pairs are centered on their source centroid
/// before fitting so `ω` rotates about the overlap rather than the origin.
///
/// With `cfg.coarse_search` the iterations also run from the coarse voting
/// peaks, and the run with the lowest [`fit_score`] wins (the identity start
/// on ties).
pub fn align_pair_lp(
    source: &PointCloud,
    target: &PointCloud,
    cfg: &RegisterConfig,
) -> Result<PairAlignment> {
    cfg.validate()?;
    for c in [source, target] {
        if c.len() < 3 {
            return Err(Error::DegenerateCorrespondences(format!(
                "cloud `{}` has {} points, need at least 3",
                c.id(),
                c.len()
            )));
        }
    }
    let tree = KdTree::new(target.points());
    let mut best = iterate_from(source, &tree, RigidTransform::identity(), cfg)?;
    if cfg.coarse_search {
        let sample = source.subsample(cfg.refine_points, cfg.rng_seed);
        let cap = 2.0
            * median_spacing(
                &tree,
                &target.subsample(cfg.refine_points, cfg.rng_seed.wrapping_add(1)),
            );
        let mut best_score = fit_score(&sample, &tree, &best.transform, cap);
        for cand in coarse_candidates(source, target, cfg) {
            // A start whose iterations break down is just not a better start.
            let Ok(run) = iterate_from(source, &tree, cand.transform, cfg) else {
                continue;
            };
            let score = fit_score(&sample, &tree, &run.transform, cap);
            if score < best_score {
                best = run;
                best_score = score;
            }
        }
    }
    Ok(best)
}

/// Mean distance from `t(sample)` to the target, each distance truncated at
/// `cap`. With a cap near the sampling spacing this rewards the pose that
/// brings the most points onto the target, whatever the overlap fraction.
fn fit_score(sample: &PointCloud, tree: &KdTree, t: &RigidTransform, cap: f64) -> f64 {
    let cap_sq = cap * cap;
    let sum: f64 = sample
        .points()
        .iter()
        .map(|p| {
            tree.nearest_within(&t.apply(p), cap_sq, usize::MAX)
                .map_or(cap, |(_, d2)| d2.sqrt())
        })
        .sum();
    sum / sample.len().max(1) as f64
}

fn iterate_from(
    source: &PointCloud,
    tree: &KdTree,
    start: RigidTransform,
    cfg: &RegisterConfig,
) -> Result<PairAlignment> {
    let mut current = start;
    let mut objective = f64::INFINITY;
    let mut converged = false;
    let mut rounds = 0;

    while rounds < cfg.max_lp_rounds {
        rounds += 1;
        // A fresh sample each round keeps the L1 fit from sticking at a vertex
        // pinned by the previous round's exactly fitted pairs.
        let seed = cfg.rng_seed.wrapping_add(rounds as u64 - 1);
        let idx = sample_indices(source.points(), cfg.pair_subsample, seed);
        let pairs = match_sampled(source, &current, &idx, tree, cfg)?;
        let sources: Vec<Point3> = pairs.iter().map(|(s, _)| *s).collect();
        let c = centroid(&sources);
        let centered: Vec<(Point3, Point3)> = pairs
            .iter()
            .map(|(s, d)| (Point3::from(s - c), Point3::from(d - c)))
            .collect();
        let lp = build_rigid_fit_lp(&centered)?;
        let sol = solve(&lp, cfg.lp_max_iters)?;
        match sol.status {
            LpStatus::Optimal => {}
            other => {
                return Err(Error::AlignmentFailed(format!(
                    "rigid-fit LP ended with status {other:?} in round {rounds}"
                )))
            }
        }
        objective = sol.objective / pairs.len() as f64;
        let (omega, t) = rigid_fit_params(&sol);
        let r = omega_to_rotation(&omega);
        let step = RigidTransform::new_unchecked(r, c.coords + t - r * c.coords);
        current = step.compose(&current);
        if omega.amax().max(t.amax()) < cfg.convergence_eps {
            converged = true;
            break;
        }
    }
    current.check_rigid()?;
    Ok(PairAlignment {
        transform: current,
        final_objective: objective,
        rounds_used: rounds,
        converged,
    })
}
