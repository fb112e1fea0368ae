//! Synthetic urban scenes: gently rolling terrain with box buildings, scanned
//! as overlapping strips along x, each strip moved by a random rigid
//! transform.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geom::{Aabb, Point3, PointCloud, RigidTransform};

const HALF_EXTENT: f64 = 20.0;
const BUILDINGS: usize = 9;
/// Terrain relief amplitude, meters.
const RELIEF: f64 = 0.8;

#[derive(Debug, Clone, PartialEq)]
pub struct SceneParams {
    pub n_scans: usize,
    pub points_per_scan: usize,
    pub max_rotation_deg: f64,
    /// Upper bound on the translation norm, as a fraction of the scene diagonal.
    pub max_translation_frac: f64,
    /// Overlap of consecutive strips as a fraction of strip width.
    pub overlap: f64,
    /// Standard deviation of per-point Gaussian range noise, meters.
    pub sensor_noise: f64,
    pub rng_seed: u64,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            n_scans: 2,
            points_per_scan: 2000,
            max_rotation_deg: 15.0,
            max_translation_frac: 0.2,
            overlap: 0.6,
            sensor_noise: 0.0,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    /// Scans as delivered: `scans[i] = truth[i](views[i])`.
    pub scans: Vec<PointCloud>,
    /// Scans in the world frame.
    pub views: Vec<PointCloud>,
    pub truth: Vec<RigidTransform>,
    pub bounds: Aabb,
}

impl SyntheticScene {
    pub fn diameter(&self) -> f64 {
        self.bounds.diagonal()
    }

    /// Transform taking `scans[i]` into the frame of `scans[reference]`.
    pub fn expected_transform(&self, i: usize, reference: usize) -> RigidTransform {
        self.truth[reference].compose(&self.truth[i].inverse())
    }
}

/// Axis-aligned rectangle; exactly one of the three extents is zero.
#[derive(Debug, Clone, Copy)]
struct Patch {
    min: Point3,
    max: Point3,
}

impl Patch {
    fn clipped_x(&self, lo: f64, hi: f64) -> Option<Patch> {
        let (a, b) = (self.min.x.max(lo), self.max.x.min(hi));
        if a > b || (a == b && self.min.x != self.max.x) {
            return None;
        }
        let mut p = *self;
        p.min.x = a;
        p.max.x = b;
        Some(p)
    }

    fn area(&self) -> f64 {
        let e = self.max - self.min;
        e.x * e.y + e.y * e.z + e.x * e.z
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Point3 {
        let mut p = self.min;
        for a in 0..3 {
            if self.max[a] > self.min[a] {
                p[a] = rng.random_range(self.min[a]..self.max[a]);
            }
        }
        p
    }
}

/// Sum of a few sinusoids in x and y.
struct Terrain {
    waves: Vec<(f64, f64, f64, f64)>,
}

impl Terrain {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        let waves = (0..3)
            .map(|_| {
                let theta = rng.random_range(0.0..std::f64::consts::TAU);
                let k = std::f64::consts::TAU / rng.random_range(12.0..35.0);
                (
                    k * theta.cos(),
                    k * theta.sin(),
                    rng.random_range(0.0..std::f64::consts::TAU),
                    RELIEF / 3.0,
                )
            })
            .collect();
        Self { waves }
    }

    fn height(&self, x: f64, y: f64) -> f64 {
        self.waves
            .iter()
            .map(|(kx, ky, phase, a)| a * (kx * x + ky * y + phase).sin())
            .sum()
    }
}

struct Layout {
    /// The first patch is the ground footprint; its z comes from `terrain`.
    patches: Vec<Patch>,
    footprints: Vec<(Point3, Point3)>,
    terrain: Terrain,
}

fn layout(rng: &mut ChaCha8Rng) -> Layout {
    let mut footprints: Vec<(Point3, Point3)> = Vec::new();
    let mut heights = Vec::new();
    let mut attempts = 0;
    while footprints.len() < BUILDINGS && attempts < 500 {
        attempts += 1;
        let w = rng.random_range(3.0..10.0);
        let d = rng.random_range(3.0..10.0);
        let cx = rng.random_range(-HALF_EXTENT + 1.0 + w / 2.0..HALF_EXTENT - 1.0 - w / 2.0);
        let cy = rng.random_range(-HALF_EXTENT + 1.0 + d / 2.0..HALF_EXTENT - 1.0 - d / 2.0);
        let lo = Point3::new(cx - w / 2.0, cy - d / 2.0, 0.0);
        let hi = Point3::new(cx + w / 2.0, cy + d / 2.0, 0.0);
        let clear = footprints.iter().all(|(a, b)| {
            lo.x > b.x + 1.0 || hi.x < a.x - 1.0 || lo.y > b.y + 1.0 || hi.y < a.y - 1.0
        });
        if clear {
            footprints.push((lo, hi));
            heights.push(rng.random_range(4.0..14.0));
        }
    }

    let terrain = Terrain::random(rng);
    let mut patches = vec![Patch {
        min: Point3::new(-HALF_EXTENT, -HALF_EXTENT, 0.0),
        max: Point3::new(HALF_EXTENT, HALF_EXTENT, 0.0),
    }];
    for ((lo, hi), h) in footprints.iter().zip(&heights) {
        let (x0, x1, y0, y1) = (lo.x, hi.x, lo.y, hi.y);
        // Walls start below the lowest possible ground and are clipped by it
        // when sampled.
        let base = -RELIEF;
        let top = terrain.height(0.5 * (x0 + x1), 0.5 * (y0 + y1)) + h;
        patches.push(Patch {
            min: Point3::new(x0, y0, base),
            max: Point3::new(x1, y0, top),
        });
        patches.push(Patch {
            min: Point3::new(x0, y1, base),
            max: Point3::new(x1, y1, top),
        });
        patches.push(Patch {
            min: Point3::new(x0, y0, base),
            max: Point3::new(x0, y1, top),
        });
        patches.push(Patch {
            min: Point3::new(x1, y0, base),
            max: Point3::new(x1, y1, top),
        });
        patches.push(Patch {
            min: Point3::new(x0, y0, top),
            max: Point3::new(x1, y1, top),
        });
    }
    Layout {
        patches,
        footprints,
        terrain,
    }
}

fn sample_view(
    layout: &Layout,
    lo: f64,
    hi: f64,
    n: usize,
    noise: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<Point3> {
    let clipped: Vec<Patch> = layout
        .patches
        .iter()
        .filter_map(|p| p.clipped_x(lo, hi))
        .collect();
    let mut cumulative = Vec::with_capacity(clipped.len());
    let mut total = 0.0;
    for p in &clipped {
        total += p.area();
        cumulative.push(total);
    }
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let u = rng.random_range(0.0..total);
        let k = cumulative
            .partition_point(|&c| c <= u)
            .min(clipped.len() - 1);
        let mut p = clipped[k].sample(rng);
        let ground = layout.terrain.height(p.x, p.y);
        let hidden = if k == 0 {
            p.z = ground;
            // Ground under a building is not visible.
            layout
                .footprints
                .iter()
                .any(|(a, b)| p.x > a.x && p.x < b.x && p.y > a.y && p.y < b.y)
        } else {
            // Wall below the terrain.
            p.z < ground
        };
        if !hidden {
            if noise > 0.0 {
                p += Vector3::new(
                    rng.sample::<f64, _>(StandardNormal),
                    rng.sample::<f64, _>(StandardNormal),
                    rng.sample::<f64, _>(StandardNormal),
                ) * noise;
            }
            out.push(p);
        }
    }
    out
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Generates `n_scans` overlapping strips of one scene. The first scan is in
/// the world frame; every other scan is moved by a random rotation of at most
/// `max_rotation_deg` about a random axis and a translation of norm at most
/// `max_translation_frac` × scene diagonal.
pub fn synth_scene(params: &SceneParams) -> Result<SyntheticScene> {
    if params.n_scans < 2 {
        return Err(Error::InvalidConfig(
            "a scene needs at least 2 scans".into(),
        ));
    }
    if params.points_per_scan < 3 {
        return Err(Error::InvalidConfig(
            "points_per_scan must be at least 3".into(),
        ));
    }
    if !(params.sensor_noise >= 0.0 && params.sensor_noise.is_finite()) {
        return Err(Error::InvalidConfig(
            "sensor_noise must be non-negative".into(),
        ));
    }
    if !(0.0..1.0).contains(&params.overlap) {
        return Err(Error::InvalidConfig("overlap must lie in [0, 1)".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let layout = layout(&mut rng);
    let corners: Vec<Point3> = layout.patches.iter().flat_map(|p| [p.min, p.max]).collect();
    let bounds = Aabb::from_points(&corners).expect("ground patch exists");
    let diameter = bounds.diagonal();

    let n = params.n_scans;
    let width = 2.0 * HALF_EXTENT / (1.0 + (n - 1) as f64 * (1.0 - params.overlap));
    let step = width * (1.0 - params.overlap);

    let mut scans = Vec::with_capacity(n);
    let mut views = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    for i in 0..n {
        let lo = -HALF_EXTENT + i as f64 * step;
        let pts = sample_view(
            &layout,
            lo,
            lo + width,
            params.points_per_scan,
            params.sensor_noise,
            &mut rng,
        );
        let t = if i == 0 {
            RigidTransform::identity()
        } else {
            let angle = rng
                .random_range(0.0..=params.max_rotation_deg.max(0.0))
                .to_radians();
            let axis = random_unit(&mut rng);
            let dist = rng.random_range(0.0..=params.max_translation_frac.max(0.0)) * diameter;
            let dir = random_unit(&mut rng);
            RigidTransform::from_axis_angle(axis * angle, dir * dist)
        };
        let view = PointCloud::new(format!("scan{i}"), pts)?;
        scans.push(PointCloud::new(
            format!("scan{i}"),
            view.points().iter().map(|p| t.apply(p)).collect(),
        )?);
        views.push(view);
        truth.push(t);
    }
    Ok(SyntheticScene {
        scans,
        views,
        truth,
        bounds,
    })
}
