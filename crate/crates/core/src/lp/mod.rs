//! Linear programming: a dense two-phase tableau simplex and the L1 rigid-fit
//! model it solves during pairwise alignment.

mod problem;
mod rigid_fit;
mod simplex;

pub use problem::{Constraint, LpProblem, LpSolution, LpStatus, Relation};
pub use rigid_fit::{build_rigid_fit_lp, omega_to_rotation, rigid_fit_params, RIGID_FIT_PARAMS};
pub use simplex::{solve, FEASIBILITY_TOL, PIVOT_TOL};
