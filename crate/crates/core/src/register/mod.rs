//! Pairwise alignment and the multi-scan registration pipelines.

mod align;
mod coarse;
mod icp;
mod pairs;
mod pipeline;
mod refine;

pub use align::align_pair_lp;
pub use coarse::{coarse_candidates, CoarseCandidate};
pub use icp::{icp_baseline, kabsch};
pub use pairs::match_pairs;
pub use pipeline::{icp_multi, tcm_icp, MergeStep, Registration};
pub use refine::{refine, refine_detailed, RefineOutcome};

use crate::error::{Error, Result};
use crate::geom::RigidTransform;

/// What the pattern search minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RefineObjective {
    /// τ between the transformed source and the target subsamples.
    Tcm,
    /// Mean distance from each transformed source subsample point to the
    /// plane fitted around its nearest target point, truncated at
    /// `pair_reject_factor` times the median at the starting pose.
    #[default]
    TruncatedNn,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegisterConfig {
    pub max_lp_rounds: usize,
    /// Source points sampled for matching in each round.
    pub pair_subsample: usize,
    /// Pairs farther apart than this multiple of the median are discarded.
    pub pair_reject_factor: f64,
    /// Stop when the largest |ω| or |t| update falls below this.
    pub convergence_eps: f64,
    pub lp_max_iters: usize,
    /// Initial rotation step of the pattern search, radians.
    pub refine_delta: f64,
    /// Initial translation step as a fraction of the target diameter.
    pub refine_delta_trans_frac: f64,
    pub refine_rounds: usize,
    /// Points per cloud used by refinement objectives.
    pub refine_points: usize,
    pub refine_objective: RefineObjective,
    /// Initial annealing temperature, in percent of the starting objective.
    /// Zero disables annealing.
    pub anneal_t0: f64,
    pub anneal_cooling: f64,
    /// Also start the LP iterations from coarse translation-voting peaks and
    /// keep the start whose result fits the target best.
    pub coarse_search: bool,
    /// Largest rotation the coarse grid covers, degrees.
    pub coarse_max_rotation_deg: f64,
    pub coarse_rotation_step_deg: f64,
    /// Largest translation component the vote grid covers, as a fraction of
    /// the larger cloud diameter.
    pub coarse_max_translation_frac: f64,
    /// Vote bins per diameter.
    pub coarse_bins: usize,
    /// Coarse starts tried in addition to the identity.
    pub coarse_candidates: usize,
    pub rng_seed: u64,
}

impl Default for RegisterConfig {
    fn default() -> Self {
        Self {
            max_lp_rounds: 30,
            pair_subsample: 200,
            pair_reject_factor: 3.0,
            convergence_eps: 1e-6,
            lp_max_iters: 50_000,
            refine_delta: 0.01,
            refine_delta_trans_frac: 0.01,
            refine_rounds: 20,
            refine_points: 500,
            refine_objective: RefineObjective::default(),
            anneal_t0: 1.0,
            anneal_cooling: 0.9,
            coarse_search: true,
            coarse_max_rotation_deg: 15.0,
            coarse_rotation_step_deg: 5.0,
            coarse_max_translation_frac: 0.5,
            coarse_bins: 32,
            coarse_candidates: 2,
            rng_seed: 0,
        }
    }
}

impl RegisterConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("pair_reject_factor", self.pair_reject_factor),
            ("convergence_eps", self.convergence_eps),
            ("refine_delta", self.refine_delta),
            ("refine_delta_trans_frac", self.refine_delta_trans_frac),
            ("coarse_rotation_step_deg", self.coarse_rotation_step_deg),
            (
                "coarse_max_translation_frac",
                self.coarse_max_translation_frac,
            ),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.max_lp_rounds == 0
            || self.pair_subsample < 3
            || self.refine_points < 2
            || self.lp_max_iters == 0
        {
            return Err(Error::InvalidConfig(
                "max_lp_rounds and lp_max_iters must be positive, pair_subsample ≥ 3, refine_points ≥ 2".into(),
            ));
        }
        if !(self.coarse_max_rotation_deg >= 0.0 && self.coarse_max_rotation_deg <= 180.0)
            || self.coarse_bins == 0
        {
            return Err(Error::InvalidConfig(
                "coarse_max_rotation_deg must lie in [0, 180] and coarse_bins must be positive"
                    .into(),
            ));
        }
        if !(self.anneal_t0 >= 0.0 && self.anneal_t0.is_finite()) {
            return Err(Error::InvalidConfig(
                "anneal_t0 must be non-negative".into(),
            ));
        }
        if !(self.anneal_cooling > 0.0 && self.anneal_cooling < 1.0) {
            return Err(Error::InvalidConfig(
                "anneal_cooling must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairAlignment {
    pub transform: RigidTransform,
    /// Mean L1 residual per pair for the LP path, RMS pair distance for ICP.
    pub final_objective: f64,
    pub rounds_used: usize,
    pub converged: bool,
}
