use crate::geom::PointCloud;
use crate::kdtree::KdTree;

/// Desk-scale default for the number of registered points measured.
pub const DEFAULT_METRIC_CAP: usize = 5000;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub rms: f64,
    pub c2c_mean: f64,
    pub c2c_std: f64,
    pub point_count_used: usize,
    pub wall_time_ms: u64,
    pub iterations: usize,
}

/// Root mean squared nearest-neighbor distance from a seeded subsample of at
/// most `cap` registered points to `truth`.
pub fn rms_error(registered: &PointCloud, truth: &PointCloud, cap: usize, seed: u64) -> f64 {
    let sample = registered.subsample(cap.max(1), seed);
    let tree = KdTree::new(truth.points());
    let sum: f64 = sample
        .points()
        .iter()
        .map(|p| tree.nearest(p).expect("truth is non-empty").1)
        .sum();
    (sum / sample.len() as f64).sqrt()
}

/// Mean and population standard deviation of nearest-neighbor distances from
/// every point of `a` to `b`.
pub fn cloud_to_cloud(a: &PointCloud, b: &PointCloud) -> (f64, f64) {
    let tree = KdTree::new(b.points());
    let d: Vec<f64> = a
        .points()
        .iter()
        .map(|p| tree.nearest(p).expect("b is non-empty").1.sqrt())
        .collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}
