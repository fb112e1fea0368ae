//! Points, clouds, bounding boxes and rigid transforms.

use nalgebra::{Matrix3, Rotation3, Vector3};

use crate::error::{Error, Result};
use crate::kdtree::KdTree;

pub type Point3 = nalgebra::Point3<f64>;

/// Tolerance on the entries of `RᵀR − I` for a rotation to count as rigid.
pub const RIGIDITY_TOL: f64 = 1e-9;

/// Squared Euclidean distance. Every nearest-neighbor path uses this exact
/// expression so results are reproducible bit-for-bit.
#[inline]
pub fn dist_sq(a: &Point3, b: &Point3) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}

/// An ordered, non-empty set of finite 3D points.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    id: String,
    points: Vec<Point3>,
}

impl PointCloud {
    pub fn new(id: impl Into<String>, points: Vec<Point3>) -> Result<Self> {
        let id = id.into();
        if points.is_empty() {
            return Err(Error::EmptyCloud(id));
        }
        if let Some(index) = points
            .iter()
            .position(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()))
        {
            return Err(Error::NonFinitePoint { id, index });
        }
        Ok(Self { id, points })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Point3> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Arithmetic mean of the points, summed in index order.
    pub fn centroid(&self) -> Point3 {
        centroid(&self.points)
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::from_points(&self.points).expect("cloud is non-empty")
    }

    /// Seeded uniform subsample without replacement, chosen by
    /// [`sample_indices`]. Returns a clone when the cloud already has at most
    /// `max_points` points; survivors keep input order.
    pub fn subsample(&self, max_points: usize, seed: u64) -> PointCloud {
        let idx = sample_indices(&self.points, max_points, seed);
        if idx.len() == self.len() {
            return self.clone();
        }
        PointCloud {
            id: self.id.clone(),
            points: idx.into_iter().map(|i| self.points[i]).collect(),
        }
    }

    /// Concatenates `other` after `self`.
    pub fn merged(&self, other: &PointCloud, id: impl Into<String>) -> PointCloud {
        let mut points = Vec::with_capacity(self.len() + other.len());
        points.extend_from_slice(&self.points);
        points.extend_from_slice(&other.points);
        PointCloud {
            id: id.into(),
            points,
        }
    }
}

pub fn centroid(points: &[Point3]) -> Point3 {
    let mut sum = Vector3::zeros();
    for p in points {
        sum += p.coords;
    }
    Point3::from(sum / points.len() as f64)
}

/// Sorted indices of a seeded uniform sample of at most `max_points` of
/// `points`. Points are ranked by a seeded hash of their coordinates, so the
/// choice follows the points rather than their positions in the slice:
/// deleting some points or reordering them leaves the rest of the sample as
/// it was.
pub fn sample_indices(points: &[Point3], max_points: usize, seed: u64) -> Vec<usize> {
    if points.len() <= max_points {
        return (0..points.len()).collect();
    }
    if max_points == 0 {
        return Vec::new();
    }
    let mut keyed: Vec<(u64, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| (point_hash(p, seed), i))
        .collect();
    keyed.select_nth_unstable(max_points - 1);
    let mut idx: Vec<usize> = keyed[..max_points].iter().map(|&(_, i)| i).collect();
    idx.sort_unstable();
    idx
}

fn point_hash(p: &Point3, seed: u64) -> u64 {
    // SplitMix64 finalizer, chained over the seed and the coordinate bits.
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    // Adding zero folds −0.0 into +0.0 so equal coordinates hash alike.
    [p.x, p.y, p.z]
        .iter()
        .fold(mix(seed), |h, c| mix(h ^ (c + 0.0).to_bits()))
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    pub fn from_points(points: &[Point3]) -> Option<Self> {
        let first = points.first()?;
        let mut min = *first;
        let mut max = *first;
        for p in &points[1..] {
            for a in 0..3 {
                min[a] = min[a].min(p[a]);
                max[a] = max[a].max(p[a]);
            }
        }
        Some(Self { min, max })
    }

    pub fn extent(&self) -> Vector3<f64> {
        self.max - self.min
    }

    pub fn center(&self) -> Point3 {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().norm()
    }

    pub fn volume(&self) -> f64 {
        let e = self.extent();
        e.x * e.y * e.z
    }

    pub fn contains(&self, p: &Point3) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    /// Box scaled about its center by `factor` along every axis.
    pub fn scaled(&self, factor: f64) -> Aabb {
        let c = self.center();
        let half = self.extent() * (0.5 * factor);
        Aabb {
            min: c - half,
            max: c + half,
        }
    }
}

/// `x ↦ R·x + T` with `R` a proper rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl RigidTransform {
    /// Validates that `rotation` is orthonormal with determinant +1.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let t = Self::new_unchecked(rotation, translation);
        t.check_rigid()?;
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::NotRigid {
                deviation: f64::INFINITY,
            });
        }
        Ok(t)
    }

    /// Builds a transform without validation; `apply_transform` and
    /// `check_rigid` reject it later if the rotation is not proper.
    pub fn new_unchecked(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::new_unchecked(Matrix3::identity(), Vector3::zeros())
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self::new_unchecked(Matrix3::identity(), translation)
    }

    /// Rotation by `‖axis_angle‖` radians about `axis_angle`, then translation.
    pub fn from_axis_angle(axis_angle: Vector3<f64>, translation: Vector3<f64>) -> Self {
        Self::new_unchecked(Rotation3::new(axis_angle).into_inner(), translation)
    }

    pub fn rot_z_deg(deg: f64) -> Self {
        Self::from_axis_angle(Vector3::z() * deg.to_radians(), Vector3::zeros())
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    #[inline]
    pub fn apply(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        Self::new_unchecked(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        Self::new_unchecked(rt, -(rt * self.translation))
    }

    /// `max |(RᵀR − I)_ij|`, or infinity when `det R ≤ 0` or an entry is not finite.
    pub fn rigidity_error(&self) -> f64 {
        if !self.rotation.iter().all(|v| v.is_finite()) || self.rotation.determinant() <= 0.0 {
            return f64::INFINITY;
        }
        let d = self.rotation.transpose() * self.rotation - Matrix3::identity();
        d.amax()
    }

    pub fn is_rigid(&self) -> bool {
        self.rigidity_error() <= RIGIDITY_TOL
    }

    pub fn check_rigid(&self) -> Result<()> {
        let deviation = self.rigidity_error();
        if deviation <= RIGIDITY_TOL {
            Ok(())
        } else {
            Err(Error::NotRigid { deviation })
        }
    }

    /// Rotation angle in radians, in `[0, π]`.
    pub fn rotation_angle(&self) -> f64 {
        let c = ((self.rotation.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
        c.acos()
    }

    /// Row-major `R` followed by `T`.
    pub fn to_row_major(&self) -> [f64; 12] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
            t.x,
            t.y,
            t.z,
        ]
    }
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

/// Applies `t` to every point, preserving order and cardinality.
pub fn apply_transform(cloud: &PointCloud, t: &RigidTransform) -> Result<PointCloud> {
    t.check_rigid()?;
    Ok(PointCloud {
        id: cloud.id.clone(),
        points: cloud.points.iter().map(|p| t.apply(p)).collect(),
    })
}

pub fn compose(a: &RigidTransform, b: &RigidTransform) -> RigidTransform {
    a.compose(b)
}

/// Minimum squared distance over distinct point pairs, via one
/// nearest-other-point query per point.
pub fn closest_pair_sq(cloud: &PointCloud) -> Result<f64> {
    if cloud.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: cloud.len(),
        });
    }
    let tree = KdTree::new(cloud.points());
    let mut best = f64::INFINITY;
    for (i, p) in cloud.points().iter().enumerate() {
        if let Some((_, d)) = tree.nearest_except(p, i) {
            if d < best {
                best = d;
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn close(a: &Point3, b: &Point3, tol: f64) -> bool {
        (a - b).amax() <= tol
    }

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(matches!(
            PointCloud::new("e", vec![]),
            Err(Error::EmptyCloud(_))
        ));
        let err = PointCloud::new("n", vec![Point3::origin(), Point3::new(f64::NAN, 0.0, 0.0)]);
        assert!(matches!(err, Err(Error::NonFinitePoint { index: 1, .. })));
    }

    #[test]
    fn apply_identity_and_rot_z() {
        let c = PointCloud::new("c", vec![Point3::new(1.0, 0.0, 0.0)]).unwrap();
        let out = apply_transform(&c, &RigidTransform::identity()).unwrap();
        assert_eq!(out.points()[0], Point3::new(1.0, 0.0, 0.0));

        let t =
            RigidTransform::from_axis_angle(Vector3::z() * FRAC_PI_2, Vector3::new(0.0, 0.0, 1.0));
        let out = apply_transform(&c, &t).unwrap();
        assert!(close(&out.points()[0], &Point3::new(0.0, 1.0, 1.0), 1e-15));
    }

    #[test]
    fn apply_then_inverse_round_trips() {
        let pts = vec![
            Point3::new(0.3, -1.2, 4.0),
            Point3::new(2.0, 0.1, -0.7),
            Point3::new(-3.3, 5.5, 0.0),
            Point3::new(0.0, 0.0, 9.1),
            Point3::new(1.0, 1.0, 1.0),
        ];
        let c = PointCloud::new("c", pts).unwrap();
        let t = RigidTransform::from_axis_angle(
            Vector3::new(0.3, -0.8, 0.4),
            Vector3::new(1.0, -2.0, 0.5),
        );
        let back = apply_transform(&apply_transform(&c, &t).unwrap(), &t.inverse()).unwrap();
        for (a, b) in c.points().iter().zip(back.points()) {
            assert!(close(a, b, 1e-12));
        }
    }

    #[test]
    fn apply_rejects_non_rigid() {
        let c = PointCloud::new("c", vec![Point3::origin()]).unwrap();
        let bad = RigidTransform::new_unchecked(Matrix3::identity() * 2.0, Vector3::zeros());
        assert!(matches!(
            apply_transform(&c, &bad),
            Err(Error::NotRigid { .. })
        ));
        let reflection = RigidTransform::new_unchecked(
            Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0)),
            Vector3::zeros(),
        );
        assert!(apply_transform(&c, &reflection).is_err());
        assert!(RigidTransform::new(Matrix3::identity() * 2.0, Vector3::zeros()).is_err());
    }

    #[test]
    fn compose_examples() {
        let b = RigidTransform::from_axis_angle(
            Vector3::new(0.1, 0.2, 0.3),
            Vector3::new(1.0, 2.0, 3.0),
        );
        assert_eq!(RigidTransform::identity().compose(&b), b);

        let id = b.compose(&b.inverse());
        assert!((id.rotation() - Matrix3::identity()).amax() <= 1e-12);
        assert!(id.translation().amax() <= 1e-12);

        let sum = RigidTransform::rot_z_deg(30.0).compose(&RigidTransform::rot_z_deg(60.0));
        assert!((sum.rotation() - RigidTransform::rot_z_deg(90.0).rotation()).amax() <= 1e-12);
    }

    #[test]
    fn compose_matches_sequential_application() {
        let a = RigidTransform::from_axis_angle(
            Vector3::new(-0.4, 0.1, 0.9),
            Vector3::new(0.0, 2.0, -1.0),
        );
        let b = RigidTransform::from_axis_angle(
            Vector3::new(0.2, 0.2, -0.1),
            Vector3::new(3.0, 0.0, 1.0),
        );
        let p = Point3::new(1.5, -2.5, 0.25);
        assert!(close(
            &a.compose(&b).apply(&p),
            &a.apply(&b.apply(&p)),
            1e-12
        ));
    }

    #[test]
    fn rotation_angle_of_rot_z() {
        assert!(
            (RigidTransform::rot_z_deg(37.0).rotation_angle() - 37f64.to_radians()).abs() < 1e-12
        );
        assert_eq!(RigidTransform::identity().rotation_angle(), 0.0);
    }

    #[test]
    fn closest_pair_examples() {
        let c = PointCloud::new(
            "c",
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(5.0, 0.0, 0.0),
            ],
        )
        .unwrap();
        assert_eq!(closest_pair_sq(&c).unwrap(), 1.0);

        let d = PointCloud::new(
            "d",
            vec![
                Point3::new(2.0, 2.0, 2.0),
                Point3::new(9.0, 0.0, 0.0),
                Point3::new(2.0, 2.0, 2.0),
            ],
        )
        .unwrap();
        assert_eq!(closest_pair_sq(&d).unwrap(), 0.0);

        let s = PointCloud::new("s", vec![Point3::origin()]).unwrap();
        assert!(matches!(
            closest_pair_sq(&s),
            Err(Error::TooFewPoints { .. })
        ));
    }

    #[test]
    fn sample_is_sorted_deterministic_and_follows_points() {
        let pts: Vec<Point3> = (0..1000)
            .map(|i| Point3::new(i as f64, (i * 7 % 13) as f64, 0.5))
            .collect();
        let idx = sample_indices(&pts, 50, 7);
        assert_eq!(idx.len(), 50);
        assert!(idx.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(idx, sample_indices(&pts, 50, 7));
        assert_ne!(idx, sample_indices(&pts, 50, 8));
        assert_eq!(
            sample_indices(&pts[..10], 50, 7),
            (0..10).collect::<Vec<_>>()
        );
        assert!(sample_indices(&pts, 0, 7).is_empty());
        // Reversing the points picks the same points.
        let rev: Vec<Point3> = pts.iter().rev().copied().collect();
        let mut back: Vec<usize> = sample_indices(&rev, 50, 7)
            .into_iter()
            .map(|i| 999 - i)
            .collect();
        back.sort_unstable();
        assert_eq!(back, idx);
    }

    #[test]
    fn aabb_scaling_and_contains() {
        let b =
            Aabb::from_points(&[Point3::new(0.0, 0.0, 0.0), Point3::new(2.0, 4.0, 6.0)]).unwrap();
        assert_eq!(b.volume(), 48.0);
        let s = b.scaled(1.5);
        assert!((s.volume() - 48.0 * 1.5f64.powi(3)).abs() < 1e-9);
        assert!(s.contains(&Point3::new(-0.4, -0.9, -1.4)));
        assert!(!b.contains(&Point3::new(-0.1, 0.0, 0.0)));
    }
}
