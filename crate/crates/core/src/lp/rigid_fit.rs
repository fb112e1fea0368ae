//! L1 rigid fit under the small-angle model `R ≈ I + [ω]×`.
//!
//! For every pair `(s, d)` and axis `a` the residual
//! `e = d_a − s_a − (ω × s)_a − t_a` is split into non-negative parts
//! `p − n = e`, so each row is an equality and the objective `Σ (p + n)` is
//! the L1 norm of the residuals. A positive, negative or zero residual
//! corresponds to the target lying above, below or on the model.
//!
//! Column layout: `ω⁺ (3) | ω⁻ (3) | t⁺ (3) | t⁻ (3) | (p, n) per row`.

use nalgebra::{Matrix3, Rotation3, Vector3};

use super::problem::{LpProblem, LpSolution, Relation};
use crate::error::{Error, Result};
use crate::geom::Point3;

/// Split columns for ω and t.
pub const RIGID_FIT_PARAMS: usize = 12;

/// Relative eigenvalue floor below which centered sources count as rank-deficient.
const RANK_TOL: f64 = 1e-10;

fn check_pairs(pairs: &[(Point3, Point3)]) -> Result<()> {
    if pairs.len() < 3 {
        return Err(Error::DegenerateCorrespondences(format!(
            "{} pairs, need at least 3",
            pairs.len()
        )));
    }
    let mean = pairs
        .iter()
        .fold(Vector3::zeros(), |acc, (s, _)| acc + s.coords)
        / pairs.len() as f64;
    let mut scatter = Matrix3::zeros();
    for (s, _) in pairs {
        let d = s.coords - mean;
        scatter += d * d.transpose();
    }
    let mut ev: Vec<f64> = scatter.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    if !(ev[0] > 0.0) || ev[1] <= RANK_TOL * ev[0] {
        return Err(Error::DegenerateCorrespondences(
            "source points are collinear or coincident".into(),
        ));
    }
    Ok(())
}

pub fn build_rigid_fit_lp(pairs: &[(Point3, Point3)]) -> Result<LpProblem> {
    check_pairs(pairs)?;
    let rows = 3 * pairs.len();
    let n = RIGID_FIT_PARAMS + 2 * rows;
    let mut objective = vec![0.0; n];
    objective[RIGID_FIT_PARAMS..]
        .iter_mut()
        .for_each(|c| *c = 1.0);
    let mut lp = LpProblem::new(objective);

    for (i, (s, d)) in pairs.iter().enumerate() {
        // (ω × s) = M ω with M = −[s]×.
        let m = [[0.0, s.z, -s.y], [-s.z, 0.0, s.x], [s.y, -s.x, 0.0]];
        for a in 0..3 {
            let r = 3 * i + a;
            let mut coeffs = vec![0.0; n];
            for k in 0..3 {
                coeffs[k] = m[a][k];
                coeffs[3 + k] = -m[a][k];
            }
            coeffs[6 + a] = 1.0;
            coeffs[9 + a] = -1.0;
            coeffs[RIGID_FIT_PARAMS + 2 * r] = 1.0;
            coeffs[RIGID_FIT_PARAMS + 2 * r + 1] = -1.0;
            lp.add_constraint(coeffs, Relation::Eq, d[a] - s[a]);
        }
    }
    Ok(lp)
}

/// Recovers `(ω, t)` from a solution of [`build_rigid_fit_lp`].
pub fn rigid_fit_params(solution: &LpSolution) -> (Vector3<f64>, Vector3<f64>) {
    let x = &solution.x;
    let omega = Vector3::new(x[0] - x[3], x[1] - x[4], x[2] - x[5]);
    let t = Vector3::new(x[6] - x[9], x[7] - x[10], x[8] - x[11]);
    (omega, t)
}

/// Exact rotation by angle `‖ω‖` about axis `ω/‖ω‖` (Rodrigues).
pub fn omega_to_rotation(omega: &Vector3<f64>) -> Matrix3<f64> {
    Rotation3::new(*omega).into_inner()
}
