use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use super::degrade::{degrade, DegradationKind, DegradationSpec};
use super::metrics::{cloud_to_cloud, rms_error, MetricReport, DEFAULT_METRIC_CAP};
use super::scene::{synth_scene, SceneParams, SyntheticScene};
use crate::error::{Error, Result};
use crate::geom::{apply_transform, PointCloud, RigidTransform};
use crate::preprocess::PreprocessConfig;
use crate::register::{icp_multi, tcm_icp, RegisterConfig, Registration};

pub const CSV_HEADER: &str =
    "method,kind,level,rms,c2c_mean,c2c_std,points_used,iterations,wall_time_ms,failed";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    TcmIcp,
    IcpBaseline,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::TcmIcp => "tcm-icp",
            Method::IcpBaseline => "icp",
        }
    }

    pub fn register(
        self,
        clouds: &[PointCloud],
        cfg: &RegisterConfig,
        pre_cfg: &PreprocessConfig,
        graph_threshold: Option<f64>,
    ) -> Result<Registration> {
        match self {
            Method::TcmIcp => tcm_icp(clouds, cfg, pre_cfg, graph_threshold),
            Method::IcpBaseline => icp_multi(clouds, cfg),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tcm-icp" => Ok(Method::TcmIcp),
            "icp" => Ok(Method::IcpBaseline),
            other => Err(Error::InvalidConfig(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub methods: Vec<Method>,
    pub kinds: Vec<DegradationKind>,
    pub levels: Vec<f64>,
    pub scene: SceneParams,
    pub register: RegisterConfig,
    pub preprocess: PreprocessConfig,
    pub graph_threshold: Option<f64>,
    pub metric_cap: usize,
    /// Record wall time; off by default so reports are reproducible byte for byte.
    pub measure_time: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            methods: vec![Method::TcmIcp],
            kinds: vec![DegradationKind::Noise],
            levels: vec![0.0],
            scene: SceneParams::default(),
            register: RegisterConfig::default(),
            preprocess: PreprocessConfig::default(),
            graph_threshold: None,
            metric_cap: DEFAULT_METRIC_CAP,
            measure_time: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub method: Method,
    pub kind: DegradationKind,
    pub level: f64,
    /// `None` when registration failed.
    pub metrics: Option<MetricReport>,
    /// Estimated transform per scan, into the reference scan's frame.
    pub transforms: Vec<RigidTransform>,
    /// Ground-truth counterpart of `transforms`.
    pub expected: Vec<RigidTransform>,
}

impl ExperimentRow {
    pub fn failed(&self) -> bool {
        self.metrics.is_none()
    }

    pub fn rms(&self) -> Option<f64> {
        self.metrics.as_ref().map(|m| m.rms)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentReport {
    pub rows: Vec<ExperimentRow>,
}

/// `%g`-style formatting with six significant digits.
pub fn format_sig(v: f64) -> String {
    if !v.is_finite() {
        return "nan".into();
    }
    if v == 0.0 {
        return "0".into();
    }
    let exp = v.abs().log10().floor() as i32;
    let s = if (-5..6).contains(&exp) {
        format!("{:.*}", (5 - exp).max(0) as usize, v)
    } else {
        format!("{v:.5e}")
    };
    // Rounding can carry into a new digit (e.g. 9.999996 → 10.00000).
    let digits = s
        .chars()
        .filter(|c| c.is_ascii_digit())
        .skip_while(|&c| c == '0')
        .count();
    if digits > 6 && !s.contains('e') && s.contains('.') {
        s[..s.len() - 1].trim_end_matches('.').to_string()
    } else {
        s
    }
}

impl ExperimentReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{},{},{},", r.method.name(), r.kind.name(), r.level);
            match &r.metrics {
                Some(m) => {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},0",
                        format_sig(m.rms),
                        format_sig(m.c2c_mean),
                        format_sig(m.c2c_std),
                        m.point_count_used,
                        m.iterations,
                        m.wall_time_ms
                    );
                }
                None => out.push_str("nan,nan,nan,0,0,0,1\n"),
            }
        }
        out
    }
}

fn merged_under(clouds: &[PointCloud], transforms: &[RigidTransform]) -> Result<PointCloud> {
    let mut points = Vec::new();
    for (c, t) in clouds.iter().zip(transforms) {
        points.extend(apply_transform(c, t)?.into_points());
    }
    PointCloud::new("merged", points)
}

fn degrade_seed(scene_seed: u64, kind: DegradationKind, scan: usize) -> u64 {
    let k = DegradationKind::ALL
        .iter()
        .position(|&x| x == kind)
        .unwrap_or(0) as u64;
    scene_seed
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(1000 * k + scan as u64)
}

fn run_one(
    scene: &SyntheticScene,
    method: Method,
    kind: DegradationKind,
    level: f64,
    cfg: &ExperimentConfig,
) -> Result<ExperimentRow> {
    let degraded: Vec<PointCloud> = scene
        .scans
        .iter()
        .enumerate()
        .map(|(i, scan)| {
            let spec =
                DegradationSpec::new(kind, level, degrade_seed(cfg.scene.rng_seed, kind, i))?;
            degrade(scan, &spec, &scan.aabb())
        })
        .collect::<Result<_>>()?;

    let start = Instant::now();
    let result = method.register(
        &degraded,
        &cfg.register,
        &cfg.preprocess,
        cfg.graph_threshold,
    );
    let elapsed = start.elapsed().as_millis() as u64;
    let reg = match result {
        Ok(reg) => reg,
        Err(Error::PairFailed { .. }) => {
            return Ok(ExperimentRow {
                method,
                kind,
                level,
                metrics: None,
                transforms: Vec::new(),
                expected: Vec::new(),
            })
        }
        Err(e) => return Err(e),
    };

    let transforms: Vec<RigidTransform> = reg.transforms.iter().map(|(_, t)| *t).collect();
    let expected: Vec<RigidTransform> = (0..scene.scans.len())
        .map(|i| scene.expected_transform(i, reg.reference))
        .collect();
    // The method's own merged output, against the clean scans placed by the
    // ground truth.
    let registered = &reg.merged;
    let truth = merged_under(&scene.scans, &expected)?;
    let rms = rms_error(registered, &truth, cfg.metric_cap, cfg.scene.rng_seed);
    let (c2c_mean, c2c_std) = cloud_to_cloud(registered, &truth);
    Ok(ExperimentRow {
        method,
        kind,
        level,
        metrics: Some(MetricReport {
            rms,
            c2c_mean,
            c2c_std,
            point_count_used: registered.len().min(cfg.metric_cap.max(1)),
            wall_time_ms: if cfg.measure_time { elapsed } else { 0 },
            iterations: reg.iterations(),
        }),
        transforms,
        expected,
    })
}

/// Runs every (method, kind, level) combination on one synthetic scene.
/// Rows are ordered by method, then kind, then level, as configured.
/// Registration failures become rows without metrics.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    for &level in &cfg.levels {
        DegradationSpec::new(DegradationKind::Noise, level, 0)?;
    }
    let mut report = ExperimentReport::default();
    if cfg.methods.is_empty() || cfg.kinds.is_empty() || cfg.levels.is_empty() {
        return Ok(report);
    }
    let scene = synth_scene(&cfg.scene)?;
    for &method in &cfg.methods {
        for &kind in &cfg.kinds {
            for &level in &cfg.levels {
                report.rows.push(run_one(&scene, method, kind, level, cfg)?);
            }
        }
    }
    Ok(report)
}
