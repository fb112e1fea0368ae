use super::RegisterConfig;
use crate::error::{Error, Result};
use crate::geom::{sample_indices, Point3, PointCloud, RigidTransform};
use crate::kdtree::KdTree;

/// Nearest-neighbor pairs `(source point, target point)` for a seeded subsample
/// of the source, dropping pairs farther apart than `pair_reject_factor`
/// times the median pair distance.
pub fn match_pairs(
    source: &PointCloud,
    target_tree: &KdTree,
    cfg: &RegisterConfig,
) -> Result<Vec<(Point3, Point3)>> {
    let idx = sample_indices(source.points(), cfg.pair_subsample, cfg.rng_seed);
    match_sampled(source, &RigidTransform::identity(), &idx, target_tree, cfg)
}

/// [`match_pairs`] for the source points at `idx`, moved by `t`. Fixing the
/// sample on the unmoved source keeps it stable while `t` changes.
pub(crate) fn match_sampled(
    source: &PointCloud,
    t: &RigidTransform,
    idx: &[usize],
    target_tree: &KdTree,
    cfg: &RegisterConfig,
) -> Result<Vec<(Point3, Point3)>> {
    if target_tree.is_empty() {
        return Err(Error::DegenerateCorrespondences("empty target".into()));
    }
    let mut matched: Vec<(Point3, Point3, f64)> = idx
        .iter()
        .map(|&i| {
            let s = t.apply(&source.points()[i]);
            let (j, d2) = target_tree.nearest(&s).expect("non-empty tree");
            (s, *target_tree.point(j), d2.sqrt())
        })
        .collect();

    let mut dists: Vec<f64> = matched.iter().map(|m| m.2).collect();
    dists.sort_unstable_by(f64::total_cmp);
    let n = dists.len();
    let median = if n % 2 == 1 {
        dists[n / 2]
    } else {
        0.5 * (dists[n / 2 - 1] + dists[n / 2])
    };
    let limit = cfg.pair_reject_factor * median;
    matched.retain(|m| m.2 <= limit);

    if matched.len() < 3 {
        return Err(Error::DegenerateCorrespondences(format!(
            "{} pairs survived rejection",
            matched.len()
        )));
    }
    Ok(matched.into_iter().map(|(s, d, _)| (s, d)).collect())
}
