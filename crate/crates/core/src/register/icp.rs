use nalgebra::{Matrix3, Vector3};

use super::pairs::match_sampled;
use super::{PairAlignment, RegisterConfig};
use crate::error::{Error, Result};
use crate::geom::{dist_sq, sample_indices, Point3, PointCloud, RigidTransform};
use crate::kdtree::KdTree;

/// Least-squares rigid transform mapping pair sources onto targets
/// (cross-covariance SVD with a reflection fix).
pub fn kabsch(pairs: &[(Point3, Point3)]) -> Result<RigidTransform> {
    if pairs.len() < 3 {
        return Err(Error::DegenerateCorrespondences(format!(
            "{} pairs",
            pairs.len()
        )));
    }
    let n = pairs.len() as f64;
    let cs = pairs
        .iter()
        .fold(Vector3::zeros(), |a, (s, _)| a + s.coords)
        / n;
    let cd = pairs
        .iter()
        .fold(Vector3::zeros(), |a, (_, d)| a + d.coords)
        / n;
    let mut h = Matrix3::zeros();
    for (s, d) in pairs {
        h += (s.coords - cs) * (d.coords - cd).transpose();
    }
    let svd = h.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::AlignmentFailed("SVD did not converge".into())),
    };
    let v = v_t.transpose();
    let sign = (v * u.transpose()).determinant().signum();
    let r = v * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, sign)) * u.transpose();
    Ok(RigidTransform::new_unchecked(r, cd - r * cs))
}

fn pair_rms(pairs: &[(Point3, Point3)], t: &RigidTransform) -> f64 {
    let sum: f64 = pairs.iter().map(|(s, d)| dist_sq(&t.apply(s), d)).sum();
    (sum / pairs.len() as f64).sqrt()
}

/// Classical point-to-point ICP from the identity.
pub fn icp_baseline(
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
    let mut current = RigidTransform::identity();
    let idx = sample_indices(source.points(), cfg.pair_subsample, cfg.rng_seed);
    let mut prev_rms = f64::INFINITY;
    let mut rms = f64::INFINITY;
    let mut converged = false;
    let mut rounds = 0;

    while rounds < cfg.max_lp_rounds {
        rounds += 1;
        let pairs = match_sampled(source, &current, &idx, &tree, cfg)?;
        let step = kabsch(&pairs)?;
        rms = pair_rms(&pairs, &step);
        current = step.compose(&current);
        if (prev_rms - rms).abs() < cfg.convergence_eps {
            converged = true;
            break;
        }
        prev_rms = rms;
    }
    current.check_rigid()?;
    Ok(PairAlignment {
        transform: current,
        final_objective: rms,
        rounds_used: rounds,
        converged,
    })
}
