use super::{align_pair_lp, icp_baseline, refine_detailed, PairAlignment, RegisterConfig};
use crate::error::{Error, Result};
use crate::geom::{apply_transform, PointCloud, RigidTransform};
use crate::preprocess::{preprocess, PreprocessConfig};
use crate::tcm::{
    build_graph, default_graph_threshold, select_min_tau, select_reference, CandidateScore,
    CorrespondenceConfig, CorrespondenceGraph,
};

/// One merge of the registration loop.
#[derive(Debug, Clone)]
pub struct MergeStep {
    /// Input index of the merged cloud.
    pub cloud: usize,
    /// Scores of all candidates considered in this step, by input index.
    pub scores: Vec<CandidateScore>,
    pub alignment: PairAlignment,
    /// Pattern-search objective before and after refinement.
    pub refine_objective: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct Registration {
    pub merged: PointCloud,
    /// Per input, in input order: cloud id and the transform into the
    /// reference frame.
    pub transforms: Vec<(String, RigidTransform)>,
    pub reference: usize,
    pub graph: Option<CorrespondenceGraph>,
    /// Sizes of the clouds that were actually merged, in input order.
    pub merged_sizes: Vec<usize>,
    pub steps: Vec<MergeStep>,
}

impl Registration {
    pub fn merge_order(&self) -> Vec<usize> {
        std::iter::once(self.reference)
            .chain(self.steps.iter().map(|s| s.cloud))
            .collect()
    }

    /// Alignment rounds summed over all merges.
    pub fn iterations(&self) -> usize {
        self.steps.iter().map(|s| s.alignment.rounds_used).sum()
    }
}

fn pair_failed(cloud: &PointCloud, e: Error) -> Error {
    Error::PairFailed {
        cloud_id: cloud.id().to_string(),
        source: Box::new(e),
    }
}

/// Multi-scan registration ordered by least τ.
///
/// Clouds are cleaned of outliers, the reference is the max-degree node of
/// the correspondence graph, and each remaining cloud is aligned to the
/// growing merged cloud in order of least τ against it. Clouds with no graph
/// edges are merged after all connected ones.
pub fn tcm_icp(
    clouds: &[PointCloud],
    cfg: &RegisterConfig,
    pre_cfg: &PreprocessConfig,
    graph_threshold: Option<f64>,
) -> Result<Registration> {
    if clouds.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: clouds.len(),
        });
    }
    cfg.validate()?;
    pre_cfg.validate()?;

    let cleaned: Vec<PointCloud> = clouds
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let per_cloud = PreprocessConfig {
                rng_seed: pre_cfg.rng_seed.wrapping_add(i as u64),
                ..pre_cfg.clone()
            };
            preprocess(c, &per_cloud).map(|p| p.cloud)
        })
        .collect::<Result<_>>()?;

    let corr_cfg = CorrespondenceConfig {
        seed: cfg.rng_seed,
        ..Default::default()
    };
    let threshold = graph_threshold.unwrap_or_else(|| default_graph_threshold(&cleaned));
    let graph = build_graph(&cleaned, threshold, &corr_cfg)?;
    let reference = select_reference(&graph);
    let degrees = graph.degrees();

    let mut transforms = vec![RigidTransform::identity(); clouds.len()];
    let mut merged = cleaned[reference].clone().with_id("merged");
    let mut remaining: Vec<usize> = (0..clouds.len()).filter(|&i| i != reference).collect();
    let mut steps = Vec::with_capacity(remaining.len());

    while !remaining.is_empty() {
        let connected: Vec<usize> = remaining
            .iter()
            .copied()
            .filter(|&i| degrees[i] > 0)
            .collect();
        let pool = if connected.is_empty() {
            remaining.clone()
        } else {
            connected
        };
        let candidates: Vec<&PointCloud> = pool.iter().map(|&i| &cleaned[i]).collect();
        let (pick, mut scores) = select_min_tau(&candidates, &merged, &corr_cfg)
            .map_err(|e| pair_failed(candidates[0], e))?;
        for s in &mut scores {
            s.index = pool[s.index];
        }
        let q = pool[pick];
        let source = &cleaned[q];

        let alignment = align_pair_lp(source, &merged, cfg).map_err(|e| pair_failed(source, e))?;
        let refined = refine_detailed(source, &merged, &alignment.transform, cfg);
        refined
            .transform
            .check_rigid()
            .map_err(|e| pair_failed(source, e))?;
        let moved = apply_transform(source, &refined.transform)?;
        merged = merged.merged(&moved, "merged");
        transforms[q] = refined.transform;
        remaining.retain(|&i| i != q);
        steps.push(MergeStep {
            cloud: q,
            scores,
            alignment,
            refine_objective: (refined.initial_objective, refined.objective),
        });
    }

    Ok(Registration {
        merged,
        transforms: clouds
            .iter()
            .zip(transforms)
            .map(|(c, t)| (c.id().to_string(), t))
            .collect(),
        reference,
        graph: Some(graph),
        merged_sizes: cleaned.iter().map(PointCloud::len).collect(),
        steps,
    })
}

/// Baseline: the first cloud is the reference and every other cloud is
/// aligned by point-to-point ICP to the growing merged cloud in input order,
/// without preprocessing.
pub fn icp_multi(clouds: &[PointCloud], cfg: &RegisterConfig) -> Result<Registration> {
    if clouds.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: clouds.len(),
        });
    }
    let mut merged = clouds[0].clone().with_id("merged");
    let mut transforms = vec![RigidTransform::identity(); clouds.len()];
    let mut steps = Vec::with_capacity(clouds.len() - 1);
    for (q, source) in clouds.iter().enumerate().skip(1) {
        let alignment = icp_baseline(source, &merged, cfg).map_err(|e| pair_failed(source, e))?;
        let moved = apply_transform(source, &alignment.transform)?;
        merged = merged.merged(&moved, "merged");
        transforms[q] = alignment.transform;
        steps.push(MergeStep {
            cloud: q,
            scores: Vec::new(),
            refine_objective: (alignment.final_objective, alignment.final_objective),
            alignment,
        });
    }
    Ok(Registration {
        merged,
        transforms: clouds
            .iter()
            .zip(transforms)
            .map(|(c, t)| (c.id().to_string(), t))
            .collect(),
        reference: 0,
        graph: None,
        merged_sizes: clouds.iter().map(PointCloud::len).collect(),
        steps,
    })
}
