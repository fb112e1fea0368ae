//! Flat `key = value` run configuration. `#` starts a comment; unknown or
//! repeated keys are errors and missing keys keep their defaults.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use tcm_icp_core::eval::{Method, DEFAULT_METRIC_CAP};
use tcm_icp_core::preprocess::PreprocessConfig;
use tcm_icp_core::register::{RefineObjective, RegisterConfig};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preprocess: PreprocessConfig,
    pub register: RegisterConfig,
    /// `None` derives the threshold from the clouds.
    pub graph_threshold: Option<f64>,
    pub metric_cap: usize,
    pub method: Method,
    pub inputs: Vec<PathBuf>,
    pub output: Option<PathBuf>,
    pub transforms: Option<PathBuf>,
    pub rng_seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            preprocess: PreprocessConfig::default(),
            register: RegisterConfig::default(),
            graph_threshold: None,
            metric_cap: DEFAULT_METRIC_CAP,
            method: Method::TcmIcp,
            inputs: Vec::new(),
            output: None,
            transforms: None,
            rng_seed: 0,
        }
    }
}

fn parse<T: FromStr>(value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("cannot parse `{value}` as {}", std::any::type_name::<T>()))
}

fn parse_auto(value: &str) -> Result<Option<f64>, String> {
    if value == "auto" {
        Ok(None)
    } else {
        parse(value).map(Some)
    }
}

fn parse_objective(value: &str) -> Result<RefineObjective, String> {
    match value {
        "tcm" => Ok(RefineObjective::Tcm),
        "truncated-nn" => Ok(RefineObjective::TruncatedNn),
        other => Err(format!(
            "unknown refine objective `{other}` (expected tcm or truncated-nn)"
        )),
    }
}

impl RunConfig {
    /// Sets one key. Seeds given here are distributed to every stage.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let p = &mut self.preprocess;
        let r = &mut self.register;
        match key {
            "k" => p.k = parse(value)?,
            "seed_radius" => p.seed_radius = parse_auto(value)?,
            "outlier_factor" => p.outlier_factor = parse(value)?,
            "max_kmeans_iters" => p.max_kmeans_iters = parse(value)?,
            "max_lp_rounds" => r.max_lp_rounds = parse(value)?,
            "pair_subsample" => r.pair_subsample = parse(value)?,
            "pair_reject_factor" => r.pair_reject_factor = parse(value)?,
            "convergence_eps" => r.convergence_eps = parse(value)?,
            "lp_max_iters" => r.lp_max_iters = parse(value)?,
            "refine_delta" => r.refine_delta = parse(value)?,
            "refine_delta_trans_frac" => r.refine_delta_trans_frac = parse(value)?,
            "refine_rounds" => r.refine_rounds = parse(value)?,
            "refine_points" => r.refine_points = parse(value)?,
            "refine_objective" => r.refine_objective = parse_objective(value)?,
            "anneal_t0" => r.anneal_t0 = parse(value)?,
            "anneal_cooling" => r.anneal_cooling = parse(value)?,
            "coarse_search" => r.coarse_search = parse(value)?,
            "coarse_max_rotation_deg" => r.coarse_max_rotation_deg = parse(value)?,
            "coarse_rotation_step_deg" => r.coarse_rotation_step_deg = parse(value)?,
            "coarse_max_translation_frac" => r.coarse_max_translation_frac = parse(value)?,
            "coarse_bins" => r.coarse_bins = parse(value)?,
            "coarse_candidates" => r.coarse_candidates = parse(value)?,
            "graph_threshold" => self.graph_threshold = parse_auto(value)?,
            "metric_cap" => self.metric_cap = parse(value)?,
            "method" => {
                self.method = value
                    .parse()
                    .map_err(|e: tcm_icp_core::Error| e.to_string())?
            }
            "inputs" => {
                self.inputs = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(PathBuf::from)
                    .collect()
            }
            "output" => self.output = Some(PathBuf::from(value)),
            "transforms" => self.transforms = Some(PathBuf::from(value)),
            "rng_seed" => self.set_seed(parse(value)?),
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.rng_seed = seed;
        self.preprocess.rng_seed = seed;
        self.register.rng_seed = seed;
    }

    pub fn parse_str(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let err = |msg: String| ConfigError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg,
            };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(err(format!("key `{key}` given twice")));
            }
            cfg.set(key, value).map_err(err)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse_str(&text, path)
    }
}
