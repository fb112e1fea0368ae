use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geom::{Aabb, Point3, PointCloud};

/// Noise standard deviation as a fraction of the scene diagonal.
const NOISE_SIGMA_FRAC: f64 = 0.01;
/// Spread of blur points around their anchor, as a fraction of the diagonal.
const BLUR_SIGMA_FRAC: f64 = 0.05;
/// Isolated points are drawn from the scene box scaled by this factor.
const ISOLATED_BOX_SCALE: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DegradationKind {
    Noise,
    IsolatedPoints,
    FeatureBlur,
    Occlusion,
    Removal,
}

impl DegradationKind {
    pub const ALL: [DegradationKind; 5] = [
        DegradationKind::Noise,
        DegradationKind::Occlusion,
        DegradationKind::Removal,
        DegradationKind::IsolatedPoints,
        DegradationKind::FeatureBlur,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DegradationKind::Noise => "noise",
            DegradationKind::IsolatedPoints => "isolated",
            DegradationKind::FeatureBlur => "blur",
            DegradationKind::Occlusion => "occlusion",
            DegradationKind::Removal => "removal",
        }
    }
}

impl fmt::Display for DegradationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DegradationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DegradationKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown degradation kind `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegradationSpec {
    kind: DegradationKind,
    level: f64,
    rng_seed: u64,
}

impl DegradationSpec {
    /// `level` is a percentage in `[0, 100]`.
    pub fn new(kind: DegradationKind, level: f64, rng_seed: u64) -> Result<Self> {
        if !(0.0..=100.0).contains(&level) {
            return Err(Error::InvalidConfig(format!(
                "degradation level {level} outside [0, 100]"
            )));
        }
        Ok(Self {
            kind,
            level,
            rng_seed,
        })
    }

    pub fn kind(&self) -> DegradationKind {
        self.kind
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    fn count(&self, n: usize) -> usize {
        ((self.level / 100.0) * n as f64).round() as usize
    }
}

fn gaussian_offset(rng: &mut ChaCha8Rng, normal: &Normal<f64>) -> Vector3<f64> {
    Vector3::new(normal.sample(rng), normal.sample(rng), normal.sample(rng))
}

fn uniform_in(rng: &mut ChaCha8Rng, b: &Aabb) -> Point3 {
    let mut p = b.min;
    for a in 0..3 {
        if b.max[a] > b.min[a] {
            p[a] = rng.random_range(b.min[a]..b.max[a]);
        }
    }
    p
}

/// A seeded permutation of `0..n`. Taking a prefix whose length grows with
/// the level makes the levels of one seed nested: every point hit at a lower
/// level is hit, the same way, at all higher ones.
fn nested_order(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    index::sample(rng, n, n).into_vec()
}

/// Applies one degradation at the given level. `scene` sets the noise scale
/// and the volume used for isolated points and occluders.
pub fn degrade(cloud: &PointCloud, spec: &DegradationSpec, scene: &Aabb) -> Result<PointCloud> {
    let n = cloud.len();
    let count = spec.count(n);
    if count == 0 {
        return Ok(cloud.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let diag = scene.diagonal();
    let mut points = cloud.points().to_vec();

    match spec.kind {
        DegradationKind::Noise => {
            let normal = Normal::new(0.0, NOISE_SIGMA_FRAC * diag).expect("finite sigma");
            for i in nested_order(&mut rng, n).into_iter().take(count) {
                points[i] += gaussian_offset(&mut rng, &normal);
            }
        }
        DegradationKind::IsolatedPoints => {
            let wide = scene.scaled(ISOLATED_BOX_SCALE);
            points.extend((0..count).map(|_| uniform_in(&mut rng, &wide)));
        }
        DegradationKind::FeatureBlur => {
            let normal = Normal::new(0.0, BLUR_SIGMA_FRAC * diag).expect("finite sigma");
            for _ in 0..count {
                let anchor = cloud.points()[rng.random_range(0..n)];
                points.push(anchor + gaussian_offset(&mut rng, &normal));
            }
        }
        DegradationKind::Occlusion => {
            let side = (spec.level / 100.0).cbrt();
            let size = scene.extent() * side;
            let mut min = scene.min;
            for a in 0..3 {
                let slack = scene.max[a] - scene.min[a] - size[a];
                if slack > 0.0 {
                    min[a] += rng.random_range(0.0..slack);
                }
            }
            let occluder = Aabb {
                min,
                max: min + size,
            };
            points.retain(|p| !occluder.contains(p));
        }
        DegradationKind::Removal => {
            let mut drop = vec![false; n];
            for i in nested_order(&mut rng, n).into_iter().take(count) {
                drop[i] = true;
            }
            points = points
                .into_iter()
                .zip(drop)
                .filter(|(_, d)| !d)
                .map(|(p, _)| p)
                .collect();
        }
    }
    PointCloud::new(cloud.id(), points)
}
