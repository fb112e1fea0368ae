//! Multi-scan rigid point cloud registration.
//!
//! Scans are cleaned of outliers, a reference scan is chosen from a
//! correspondence graph, and the remaining scans are merged one at a time in
//! order of least transformation compatibility measure (τ). Each merge solves
//! an L1 rigid fit with a simplex LP and polishes it with a pattern search.
//! A point-to-point ICP baseline and an evaluation harness are included.

// `!(x > 0.0)` is used deliberately so NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub use nalgebra;

pub mod error;
pub mod eval;
pub mod geom;
pub mod kdtree;
pub mod lp;
pub mod preprocess;
pub mod register;
pub mod tcm;

pub use error::{Error, Result};
pub use geom::{
    apply_transform, closest_pair_sq, compose, Aabb, Point3, PointCloud, RigidTransform,
};
pub use kdtree::KdTree;
