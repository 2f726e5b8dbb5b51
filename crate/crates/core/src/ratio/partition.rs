use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, StreamTag};

/// A finite partition of feature space into cells `0..num_cells()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Partition {
    /// Axis-aligned equal-width grid; points outside the box fall in the
    /// nearest edge cell.
    Grid {
        lo: Vec<f64>,
        width: Vec<f64>,
        per_axis: usize,
    },
    /// Voronoi cells of the centroids (nearest centroid, lowest index on ties).
    Centroids { centroids: Vec<Vec<f64>> },
}

pub const MAX_GRID_DIM: usize = 3;

impl Partition {
    /// Grid with `m` cells covering the bounding box of `points`. For d > 1,
    /// `m` must be a perfect d-th power.
    pub fn grid_over(points: &[&[f64]], m: usize) -> Result<Self> {
        let d = points.first().map(|p| p.len()).unwrap_or(0);
        if d == 0 || m == 0 {
            return Err(Error::InvalidArgument("grid needs points and at least one bin".into()));
        }
        if d > MAX_GRID_DIM {
            return Err(Error::InvalidArgument(format!(
                "equal-width histogram only offered for d <= {MAX_GRID_DIM}, got d = {d}; use k-means"
            )));
        }
        let per_axis = (m as f64).powf(1.0 / d as f64).round() as usize;
        if per_axis.pow(d as u32) != m {
            return Err(Error::InvalidArgument(format!(
                "{m} bins is not a perfect power for d = {d}"
            )));
        }
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for p in points {
            for i in 0..d {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
        let width = lo
            .iter()
            .zip(&hi)
            .map(|(l, h)| {
                let w = (h - l) / per_axis as f64;
                if w > 0.0 { w } else { 1.0 }
            })
            .collect();
        Ok(Partition::Grid { lo, width, per_axis })
    }

    pub fn num_cells(&self) -> usize {
        match self {
            Partition::Grid { lo, per_axis, .. } => per_axis.pow(lo.len() as u32),
            Partition::Centroids { centroids } => centroids.len(),
        }
    }

    pub fn assign(&self, x: &[f64]) -> usize {
        match self {
            Partition::Grid { lo, width, per_axis } => {
                let mut cell = 0;
                for i in 0..lo.len() {
                    let b = ((x[i] - lo[i]) / width[i]).floor();
                    let b = if b.is_nan() || b < 0.0 { 0 } else { (b as usize).min(per_axis - 1) };
                    cell = cell * per_axis + b;
                }
                cell
            }
            Partition::Centroids { centroids } => nearest(centroids, x),
        }
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid, lowest index on ties.
pub fn nearest(centroids: &[Vec<f64>], x: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(c, x);
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

/// Lloyd's algorithm with k-means++ seeding. A centroid that loses all its
/// points is moved to a uniformly random data point.
pub fn kmeans(points: &[&[f64]], m: usize, iters: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if m == 0 || iters == 0 {
        return Err(Error::InvalidArgument("k-means needs m >= 1 and iters >= 1".into()));
    }
    if m > points.len() {
        return Err(Error::InvalidArgument(format!(
            "{m} clusters requested for {} points",
            points.len()
        )));
    }
    let mut rng = rng::stream(seed, StreamTag::KMeans, 0);
    let n = points.len();
    let d = points[0].len();

    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(m);
    centroids.push(points[rng.random_range(0..n)].to_vec());
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < m {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, w) in d2.iter().enumerate() {
                if u < *w {
                    idx = i;
                    break;
                }
                u -= w;
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        let c = points[pick].to_vec();
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, &c));
        }
        centroids.push(c);
    }

    let mut assign = vec![usize::MAX; n];
    for _ in 0..iters {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let j = nearest(&centroids, p);
            if j != assign[i] {
                assign[i] = j;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; d]; m];
        let mut counts = vec![0usize; m];
        for (i, p) in points.iter().enumerate() {
            counts[assign[i]] += 1;
            for (s, v) in sums[assign[i]].iter_mut().zip(p.iter()) {
                *s += v;
            }
        }
        for j in 0..m {
            if counts[j] == 0 {
                centroids[j] = points[rng.random_range(0..n)].to_vec();
            } else {
                centroids[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            }
        }
    }
    Ok(centroids)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn refs(v: &[Vec<f64>]) -> Vec<&[f64]> {
        v.iter().map(|x| x.as_slice()).collect()
    }

    #[test]
    fn grid_assigns_row_major() {
        let pts = vec![vec![0.0, 0.0], vec![2.0, 2.0]];
        let g = Partition::grid_over(&refs(&pts), 4).unwrap();
        assert_eq!(g.num_cells(), 4);
        assert_eq!(g.assign(&[0.1, 0.1]), 0);
        assert_eq!(g.assign(&[0.1, 1.9]), 1);
        assert_eq!(g.assign(&[1.9, 0.1]), 2);
        assert_eq!(g.assign(&[2.0, 2.0]), 3);
        assert_eq!(g.assign(&[-5.0, 9.0]), 1);
    }

    #[test]
    fn grid_rejects_high_dim_and_non_powers() {
        let p4 = vec![vec![0.0; 4]];
        assert!(Partition::grid_over(&refs(&p4), 16).is_err());
        let p2 = vec![vec![0.0; 2]];
        assert!(Partition::grid_over(&refs(&p2), 5).is_err());
    }

    #[test]
    fn kmeans_finds_separated_blobs() {
        let mut pts = Vec::new();
        for (cx, cy) in [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)] {
            for i in 0..30 {
                let t = i as f64 * 0.1;
                pts.push(vec![cx + t.sin() * 0.3, cy + t.cos() * 0.3]);
            }
        }
        let c = kmeans(&refs(&pts), 3, 50, 1).unwrap();
        let part = Partition::Centroids { centroids: c };
        for blob in 0..3 {
            let cell = part.assign(&pts[blob * 30]);
            assert!((0..30).all(|i| part.assign(&pts[blob * 30 + i]) == cell));
        }
    }

    #[test]
    fn kmeans_deterministic_and_handles_duplicates() {
        let pts = vec![vec![1.0]; 10];
        let a = kmeans(&refs(&pts), 3, 5, 7).unwrap();
        assert_eq!(a, kmeans(&refs(&pts), 3, 5, 7).unwrap());
        assert!(a.iter().all(|c| c == &vec![1.0]));
        assert!(kmeans(&refs(&pts), 11, 5, 7).is_err());
    }
}
