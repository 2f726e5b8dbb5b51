use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, StreamRng, StreamTag};

/// Class-conditional feature distribution shared by every client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseGenerator {
    GaussianClusters(GaussianClusters),
    /// Class c maps to the basis vector e_c of dimension `num_classes`.
    OneHot { num_classes: usize },
}

impl BaseGenerator {
    pub fn num_classes(&self) -> usize {
        match self {
            BaseGenerator::GaussianClusters(g) => g.num_classes,
            BaseGenerator::OneHot { num_classes } => *num_classes,
        }
    }

    pub fn feature_dim(&self) -> usize {
        match self {
            BaseGenerator::GaussianClusters(g) => g.dim,
            BaseGenerator::OneHot { num_classes } => *num_classes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            BaseGenerator::GaussianClusters(g) => g.validate(),
            BaseGenerator::OneHot { num_classes } if *num_classes == 0 => {
                Err(Error::Configuration("one-hot generator needs at least one class".into()))
            }
            BaseGenerator::OneHot { .. } => Ok(()),
        }
    }

    /// Draw `n` feature vectors of class `class` from `rng`.
    pub fn sample_class(&self, class: usize, n: usize, rng: &mut StreamRng) -> Result<Vec<Vec<f64>>> {
        if class >= self.num_classes() {
            return Err(Error::InvalidArgument(format!(
                "class {class} out of range for {} classes",
                self.num_classes()
            )));
        }
        match self {
            BaseGenerator::GaussianClusters(g) => {
                let centers = g.centers()?;
                Ok((0..n).map(|_| g.draw(&centers, class, rng)).collect())
            }
            BaseGenerator::OneHot { num_classes } => {
                let mut e = vec![0.0; *num_classes];
                e[class] = 1.0;
                Ok(vec![e; n])
            }
        }
    }
}

/// Each class is a union of `clusters_per_class` isotropic Gaussian blobs
/// truncated to a ball of radius `radius`. Centres are placed at least
/// `2 * radius + gap` apart, so every class occupies its own region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianClusters {
    pub dim: usize,
    pub num_classes: usize,
    #[serde(default = "default_clusters_per_class")]
    pub clusters_per_class: usize,
    /// Per-coordinate standard deviation before truncation.
    #[serde(default = "default_std")]
    pub std: f64,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_gap")]
    pub gap: f64,
    /// Half-width of the box the centres are drawn from.
    #[serde(default = "default_extent")]
    pub extent: f64,
    #[serde(default)]
    pub layout_seed: u64,
}

fn default_clusters_per_class() -> usize {
    1
}
fn default_std() -> f64 {
    0.5
}
fn default_radius() -> f64 {
    1.0
}
fn default_gap() -> f64 {
    0.25
}
fn default_extent() -> f64 {
    6.0
}

const MAX_PLACEMENT_TRIES: usize = 100_000;

impl GaussianClusters {
    pub fn new(dim: usize, num_classes: usize) -> Self {
        Self {
            dim,
            num_classes,
            clusters_per_class: default_clusters_per_class(),
            std: default_std(),
            radius: default_radius(),
            gap: default_gap(),
            extent: default_extent(),
            layout_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.num_classes == 0 || self.clusters_per_class == 0 {
            return Err(Error::Configuration(
                "dim, num_classes and clusters_per_class must be positive".into(),
            ));
        }
        if !(self.std > 0.0 && self.radius > 0.0 && self.gap >= 0.0 && self.extent > 0.0) {
            return Err(Error::Configuration(
                "std, radius and extent must be positive, gap nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// Cluster centres indexed `[class][cluster]`, fixed by `layout_seed`.
    pub fn centers(&self) -> Result<Vec<Vec<Vec<f64>>>> {
        self.validate()?;
        let mut rng = rng::stream(self.layout_seed, StreamTag::Layout, 0);
        let min_dist = 2.0 * self.radius + self.gap;
        let total = self.num_classes * self.clusters_per_class;
        let mut placed: Vec<Vec<f64>> = Vec::with_capacity(total);
        let mut tries = 0;
        while placed.len() < total {
            tries += 1;
            if tries > MAX_PLACEMENT_TRIES {
                return Err(Error::Configuration(format!(
                    "could not place {total} disjoint clusters of radius {} in [-{e}, {e}]^{}",
                    self.radius,
                    self.dim,
                    e = self.extent
                )));
            }
            let c: Vec<f64> = (0..self.dim)
                .map(|_| rng.random_range(-self.extent..=self.extent))
                .collect();
            if placed.iter().all(|p| dist(p, &c) >= min_dist) {
                placed.push(c);
            }
        }
        // Interleave so cluster j of every class is placed before cluster j+1.
        let mut out = vec![Vec::with_capacity(self.clusters_per_class); self.num_classes];
        for (i, c) in placed.into_iter().enumerate() {
            out[i % self.num_classes].push(c);
        }
        Ok(out)
    }

    fn draw(&self, centers: &[Vec<Vec<f64>>], class: usize, rng: &mut StreamRng) -> Vec<f64> {
        let which = rng.random_range(0..self.clusters_per_class);
        let center = &centers[class][which];
        loop {
            let offset: Vec<f64> = (0..self.dim)
                .map(|_| self.std * Distribution::<f64>::sample(&StandardNormal, rng))
                .collect();
            if norm(&offset) <= self.radius {
                return center.iter().zip(&offset).map(|(c, o)| c + o).collect();
            }
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clusters_are_disjoint_and_samples_stay_inside() {
        let mut g = GaussianClusters::new(2, 4);
        g.clusters_per_class = 3;
        let centers = g.centers().unwrap();
        let mut rng = rng::from_seed(3);
        for class in 0..4 {
            for x in BaseGenerator::GaussianClusters(g.clone())
                .sample_class(class, 200, &mut rng)
                .unwrap()
            {
                let own = centers[class]
                    .iter()
                    .map(|c| dist(c, &x))
                    .fold(f64::INFINITY, f64::min);
                assert!(own <= g.radius + 1e-12);
                for (other, cs) in centers.iter().enumerate().filter(|(o, _)| *o != class) {
                    for c in cs {
                        assert!(dist(c, &x) > g.radius, "class {class} leaked into {other}");
                    }
                }
            }
        }
    }

    #[test]
    fn layout_depends_only_on_layout_seed() {
        let g = GaussianClusters::new(3, 5);
        assert_eq!(g.centers().unwrap(), g.centers().unwrap());
        let mut h = g.clone();
        h.layout_seed = 1;
        assert_ne!(g.centers().unwrap(), h.centers().unwrap());
    }

    #[test]
    fn crowded_layout_is_reported() {
        let mut g = GaussianClusters::new(1, 50);
        g.extent = 2.0;
        assert!(matches!(g.centers(), Err(Error::Configuration(_))));
    }

    #[test]
    fn one_hot_emits_basis_vectors() {
        let g = BaseGenerator::OneHot { num_classes: 3 };
        let xs = g.sample_class(2, 2, &mut rng::from_seed(0)).unwrap();
        assert_eq!(xs, vec![vec![0.0, 0.0, 1.0]; 2]);
    }
}
