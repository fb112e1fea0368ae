//! Transformation compatibility measure and reference selection.
//!
//! `τ(a, b) = f · g · h` where `f` sums each cloud's minimum squared distance
//! to the other cloud's centroid, `g` is the absolute difference of the two
//! closest-pair squared spacings, and `h = 1 / (|a|·|b|)`. Lower τ means a
//! candidate is merged earlier.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::geom::{closest_pair_sq, dist_sq, PointCloud};
use crate::kdtree::KdTree;

pub const DEFAULT_MAX_CORR_POINTS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TcmBreakdown {
    pub f: f64,
    pub g_raw: f64,
    pub g: f64,
    pub h: f64,
    pub tau: f64,
}

impl TcmBreakdown {
    /// `f · h`, the secondary ordering key when τ ties.
    pub fn fh(&self) -> f64 {
        self.f * self.h
    }
}

fn min_sq_to(cloud: &PointCloud, target: &nalgebra::Point3<f64>) -> f64 {
    cloud
        .points()
        .iter()
        .map(|p| dist_sq(p, target))
        .fold(f64::INFINITY, f64::min)
}

/// Inter-cluster term: `min_{p∈a} ‖p − c(b)‖² + min_{q∈b} ‖q − c(a)‖²`.
pub fn inter_cluster_f(a: &PointCloud, b: &PointCloud) -> f64 {
    let x = min_sq_to(a, &b.centroid());
    let y = min_sq_to(b, &a.centroid());
    x + y
}

/// Intra-cluster term: closest-pair spacing of `a` minus that of `b`, and its
/// magnitude.
pub fn intra_cluster_g(a: &PointCloud, b: &PointCloud) -> Result<(f64, f64)> {
    let m = closest_pair_sq(a)?;
    let n = closest_pair_sq(b)?;
    let raw = m - n;
    Ok((raw, raw.abs()))
}

pub fn normalization_h(a: &PointCloud, b: &PointCloud) -> f64 {
    1.0 / ((a.len() as f64) * (b.len() as f64))
}

pub fn tau(a: &PointCloud, b: &PointCloud) -> Result<TcmBreakdown> {
    let f = inter_cluster_f(a, b);
    let (g_raw, g) = intra_cluster_g(a, b)?;
    let h = normalization_h(a, b);
    Ok(TcmBreakdown {
        f,
        g_raw,
        g,
        h,
        tau: f * g * h,
    })
}

/// `max_{p∈a} min_{q∈b} ‖p − q‖²`.
pub fn directed_hausdorff_sq(a: &PointCloud, b: &PointCloud) -> f64 {
    let tree = KdTree::new(b.points());
    a.points()
        .iter()
        .map(|p| tree.nearest(p).map_or(f64::INFINITY, |(_, d)| d))
        .fold(0.0, f64::max)
}

/// Symmetric Hausdorff distance with a squared inner metric.
pub fn hausdorff_sq(a: &PointCloud, b: &PointCloud) -> f64 {
    directed_hausdorff_sq(a, b).max(directed_hausdorff_sq(b, a))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorrespondenceConfig {
    pub max_points: usize,
    pub seed: u64,
}

impl Default for CorrespondenceConfig {
    fn default() -> Self {
        Self {
            max_points: DEFAULT_MAX_CORR_POINTS,
            seed: 0,
        }
    }
}

fn mean_nn_distance(from: &PointCloud, to: &KdTree) -> f64 {
    let sum: f64 = from
        .points()
        .iter()
        .map(|p| to.nearest(p).map_or(f64::INFINITY, |(_, d)| d.sqrt()))
        .sum();
    sum / from.len() as f64
}

/// Closeness of two clouds: the average of the two directed mean
/// nearest-neighbor distances (unsquared), each cloud subsampled to at most
/// `cfg.max_points` points. The subsample depends only on the cloud and the
/// seed, so the value is symmetric.
pub fn correspondence(a: &PointCloud, b: &PointCloud, cfg: &CorrespondenceConfig) -> f64 {
    let sa = a.subsample(cfg.max_points, cfg.seed);
    let sb = b.subsample(cfg.max_points, cfg.seed);
    let ta = KdTree::new(sa.points());
    let tb = KdTree::new(sb.points());
    0.5 * (mean_nn_distance(&sa, &tb) + mean_nn_distance(&sb, &ta))
}

/// Undirected graph over clouds with an edge wherever correspondence falls
/// strictly below the threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceGraph {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    threshold: f64,
}

impl CorrespondenceGraph {
    /// Builds a graph from an explicit edge list. Edges are normalized to
    /// `(low, high)`, deduplicated and sorted; self-loops are rejected.
    pub fn from_edges(node_count: usize, edges: &[(usize, usize)], threshold: f64) -> Result<Self> {
        let mut norm = Vec::with_capacity(edges.len());
        for &(i, j) in edges {
            if i == j {
                return Err(Error::InvalidConfig(format!("self-loop on node {i}")));
            }
            if i >= node_count || j >= node_count {
                return Err(Error::InvalidConfig(format!(
                    "edge ({i}, {j}) out of range for {node_count} nodes"
                )));
            }
            norm.push((i.min(j), i.max(j)));
        }
        norm.sort_unstable();
        norm.dedup();
        Ok(Self {
            node_count,
            edges: norm,
            threshold,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn degree(&self, node: usize) -> usize {
        self.edges
            .iter()
            .filter(|&&(i, j)| i == node || j == node)
            .count()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.node_count];
        for &(i, j) in &self.edges {
            d[i] += 1;
            d[j] += 1;
        }
        d
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.binary_search(&(i.min(j), i.max(j))).is_ok()
    }
}

/// Half the mean AABB diagonal of the clouds.
pub fn default_graph_threshold(clouds: &[PointCloud]) -> f64 {
    let sum: f64 = clouds.iter().map(|c| c.aabb().diagonal()).sum();
    0.5 * sum / clouds.len() as f64
}

pub fn build_graph(
    clouds: &[PointCloud],
    threshold: f64,
    cfg: &CorrespondenceConfig,
) -> Result<CorrespondenceGraph> {
    if clouds.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: clouds.len(),
        });
    }
    if !(threshold >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "graph threshold must be non-negative, got {threshold}"
        )));
    }
    let mut edges = Vec::new();
    for i in 0..clouds.len() {
        for j in i + 1..clouds.len() {
            if correspondence(&clouds[i], &clouds[j], cfg) < threshold {
                edges.push((i, j));
            }
        }
    }
    CorrespondenceGraph::from_edges(clouds.len(), &edges, threshold)
}

/// Maximum-degree node; ties go to the node closest to the middle of the
/// input list, then to the lower index.
pub fn select_reference(graph: &CorrespondenceGraph) -> usize {
    let n = graph.node_count();
    let degrees = graph.degrees();
    // |2i − (n − 1)| is twice the distance to the middle position.
    let off_center = |i: usize| (2 * i).abs_diff(n.saturating_sub(1));
    (0..n)
        .min_by(|&a, &b| {
            degrees[b]
                .cmp(&degrees[a])
                .then(off_center(a).cmp(&off_center(b)))
                .then(a.cmp(&b))
        })
        .unwrap_or(0)
}

/// A candidate's ordering key against the current merged cloud.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateScore {
    pub index: usize,
    pub breakdown: TcmBreakdown,
    pub correspondence: f64,
}

/// Ordering on (τ, f·h, correspondence, index); lower is merged earlier.
pub fn compare_candidates(a: &CandidateScore, b: &CandidateScore) -> Ordering {
    a.breakdown
        .tau
        .total_cmp(&b.breakdown.tau)
        .then(a.breakdown.fh().total_cmp(&b.breakdown.fh()))
        .then(a.correspondence.total_cmp(&b.correspondence))
        .then(a.index.cmp(&b.index))
}

/// Scores every candidate against `reference` and returns the position (into
/// `candidates`) of the one with least τ, plus all scores.
pub fn select_min_tau(
    candidates: &[&PointCloud],
    reference: &PointCloud,
    cfg: &CorrespondenceConfig,
) -> Result<(usize, Vec<CandidateScore>)> {
    if candidates.is_empty() {
        return Err(Error::InvalidConfig("no candidate clouds".into()));
    }
    // Correspondence is only needed to break exact ties in (τ, f·h), so it is
    // computed lazily.
    let mut scores = candidates
        .iter()
        .enumerate()
        .map(|(index, c)| {
            Ok(CandidateScore {
                index,
                breakdown: tau(c, reference)?,
                correspondence: f64::NAN,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best_key = scores
        .iter()
        .map(|s| (s.breakdown.tau, s.breakdown.fh()))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)))
        .expect("non-empty");
    let tied: Vec<usize> = scores
        .iter()
        .filter(|s| (s.breakdown.tau, s.breakdown.fh()) == best_key)
        .map(|s| s.index)
        .collect();
    if tied.len() > 1 {
        for &i in &tied {
            scores[i].correspondence = correspondence(candidates[i], reference, cfg);
        }
    }
    let best = tied
        .into_iter()
        .min_by(|&a, &b| compare_candidates(&scores[a], &scores[b]))
        .expect("non-empty");
    Ok((best, scores))
}
