//! Outlier removal: well-separated seeding, Lloyd k-means, and a per-cluster
//! distance threshold.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geom::{dist_sq, Point3, PointCloud};
use crate::kdtree::KdTree;

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessConfig {
    /// Number of clusters.
    pub k: usize,
    /// Seeding exclusion radius; `None` means scene diameter / (2k).
    pub seed_radius: Option<f64>,
    /// A point is an outlier beyond this multiple of its cluster's median
    /// distance-to-centroid.
    pub outlier_factor: f64,
    pub max_kmeans_iters: usize,
    pub rng_seed: u64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            k: 8,
            seed_radius: None,
            outlier_factor: 3.0,
            max_kmeans_iters: 50,
            rng_seed: 0,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if let Some(r) = self.seed_radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidConfig("seed_radius must be positive".into()));
            }
        }
        if !(self.outlier_factor > 0.0) {
            return Err(Error::InvalidConfig(
                "outlier_factor must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn effective_seed_radius(&self, cloud: &PointCloud) -> f64 {
        self.seed_radius
            .unwrap_or_else(|| cloud.aabb().diagonal() / (2.0 * self.k as f64))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Seeds {
    pub points: Vec<Point3>,
    /// How many times the exclusion radius had to be halved because the
    /// candidate pool emptied. Non-zero means the seeds are closer than the
    /// configured radius.
    pub radius_halvings: u32,
}

/// Draws `k` seeds from the cloud. Each pick removes every point within the
/// current radius from the candidate pool; when the pool empties the radius is
/// halved and the pool rebuilt.
pub fn seed_centroids(cloud: &PointCloud, cfg: &PreprocessConfig) -> Result<Seeds> {
    cfg.validate()?;
    let n = cloud.len();
    if cfg.k > n {
        return Err(Error::TooFewPoints {
            needed: cfg.k,
            got: n,
        });
    }
    let mut radius = cfg.effective_seed_radius(cloud);
    if !(radius > 0.0) {
        // all points coincide
        radius = f64::MIN_POSITIVE;
    }
    let tree = KdTree::new(cloud.points());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut chosen: Vec<usize> = Vec::with_capacity(cfg.k);
    let mut available = vec![true; n];
    let mut halvings = 0;

    while chosen.len() < cfg.k {
        let mut pool: Vec<usize> = (0..n).filter(|&i| available[i]).collect();
        if pool.is_empty() {
            radius *= 0.5;
            halvings += 1;
            let mut is_seed = vec![false; n];
            for &s in &chosen {
                is_seed[s] = true;
            }
            available = (0..n)
                .map(|i| {
                    !is_seed[i]
                        && chosen.iter().all(|&s| {
                            dist_sq(&cloud.points()[i], &cloud.points()[s]) > radius * radius
                        })
                })
                .collect();
            pool = (0..n).filter(|&i| available[i]).collect();
            if pool.is_empty() && halvings > 64 {
                // Only duplicates of existing seeds remain.
                pool = (0..n).filter(|&i| !is_seed[i]).collect();
            } else if pool.is_empty() {
                continue;
            }
        }
        let pick = pool[rng.random_range(0..pool.len())];
        chosen.push(pick);
        available[pick] = false;
        for i in tree.within_radius(&cloud.points()[pick], radius) {
            available[i] = false;
        }
    }

    Ok(Seeds {
        points: chosen.into_iter().map(|i| cloud.points()[i]).collect(),
        radius_halvings: halvings,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub centroids: Vec<Point3>,
    /// Cluster index per point, in cloud order.
    pub assignment: Vec<usize>,
    /// Centroid update steps performed.
    pub iterations: usize,
}

fn nearest_centroid(p: &Point3, centroids: &[Point3]) -> usize {
    let mut best = 0;
    let mut best_d = dist_sq(p, &centroids[0]);
    for (j, c) in centroids.iter().enumerate().skip(1) {
        let d = dist_sq(p, c);
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    best
}

fn assign(points: &[Point3], centroids: &[Point3]) -> Vec<usize> {
    points
        .iter()
        .map(|p| nearest_centroid(p, centroids))
        .collect()
}

/// Lloyd iterations until the assignment stops changing or
/// `max_kmeans_iters` updates have run. Empty clusters keep their centroid.
pub fn kmeans(cloud: &PointCloud, seeds: &[Point3], cfg: &PreprocessConfig) -> Result<Clustering> {
    if seeds.is_empty() {
        return Err(Error::InvalidConfig(
            "k-means needs at least one seed".into(),
        ));
    }
    let points = cloud.points();
    let mut centroids = seeds.to_vec();
    let mut assignment = assign(points, &centroids);
    let mut iterations = 0;
    while iterations < cfg.max_kmeans_iters {
        let mut sums = vec![nalgebra::Vector3::<f64>::zeros(); centroids.len()];
        let mut counts = vec![0usize; centroids.len()];
        for (p, &c) in points.iter().zip(&assignment) {
            sums[c] += p.coords;
            counts[c] += 1;
        }
        for (j, c) in centroids.iter_mut().enumerate() {
            if counts[j] > 0 {
                *c = Point3::from(sums[j] / counts[j] as f64);
            }
        }
        iterations += 1;
        let next = assign(points, &centroids);
        if next == assignment {
            break;
        }
        assignment = next;
    }
    Ok(Clustering {
        centroids,
        assignment,
        iterations,
    })
}

fn median(values: &mut [f64]) -> f64 {
    let n = values.len();
    values.sort_unstable_by(f64::total_cmp);
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Drops points farther from their centroid than `outlier_factor` times the
/// cluster's median distance. Survivors keep their order; if every point would
/// be dropped the cloud is returned unchanged.
pub fn remove_outliers(
    cloud: &PointCloud,
    clustering: &Clustering,
    cfg: &PreprocessConfig,
) -> Result<(PointCloud, usize)> {
    if clustering.assignment.len() != cloud.len() {
        return Err(Error::DimensionMismatch(format!(
            "assignment has {} entries for {} points",
            clustering.assignment.len(),
            cloud.len()
        )));
    }
    let k = clustering.centroids.len();
    let dist: Vec<f64> = cloud
        .points()
        .iter()
        .zip(&clustering.assignment)
        .map(|(p, &c)| dist_sq(p, &clustering.centroids[c]).sqrt())
        .collect();

    let mut per_cluster: Vec<Vec<f64>> = vec![Vec::new(); k];
    for (&d, &c) in dist.iter().zip(&clustering.assignment) {
        per_cluster[c].push(d);
    }
    let thresholds: Vec<f64> = per_cluster
        .iter_mut()
        .map(|ds| {
            if ds.is_empty() {
                f64::INFINITY
            } else {
                cfg.outlier_factor * median(ds)
            }
        })
        .collect();

    let survivors: Vec<Point3> = cloud
        .points()
        .iter()
        .zip(dist.iter().zip(&clustering.assignment))
        .filter(|(_, (&d, &c))| d <= thresholds[c])
        .map(|(p, _)| *p)
        .collect();

    if survivors.is_empty() {
        return Ok((cloud.clone(), 0));
    }
    let removed = cloud.len() - survivors.len();
    Ok((PointCloud::new(cloud.id(), survivors)?, removed))
}

#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub cloud: PointCloud,
    pub removed: usize,
    pub clustering: Clustering,
    pub seeds: Seeds,
}

/// Seeding, clustering and outlier removal in one call. `k` is clamped to the
/// cloud size.
pub fn preprocess(cloud: &PointCloud, cfg: &PreprocessConfig) -> Result<Preprocessed> {
    let cfg = PreprocessConfig {
        k: cfg.k.min(cloud.len()),
        ..cfg.clone()
    };
    let seeds = seed_centroids(cloud, &cfg)?;
    let clustering = kmeans(cloud, &seeds.points, &cfg)?;
    let (clean, removed) = remove_outliers(cloud, &clustering, &cfg)?;
    Ok(Preprocessed {
        cloud: clean,
        removed,
        clustering,
        seeds,
    })
}
