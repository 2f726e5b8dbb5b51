use std::io::Write;

use serde::{Deserialize, Serialize};

use super::partition::{kmeans, Partition};
use crate::error::{Error, Result};

/// Histogram estimate of the supremum of client k's combined ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupremumEstimate {
    pub r_tilde: f64,
    /// `gamma / r_tilde`.
    pub c: f64,
    pub gamma: f64,
    pub num_bins: usize,
    pub bin_ratios: Vec<f64>,
    pub partition: Partition,
}

impl SupremumEstimate {
    /// Same estimate with a different safety factor gamma in (0, 1].
    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidArgument(format!("gamma must lie in (0, 1], got {gamma}")));
        }
        self.gamma = gamma;
        self.c = gamma / self.r_tilde;
        Ok(self)
    }
}

/// Per-bin ratio: pooled count normalised by one client's pool size `n_te`
/// over the train fraction. Zero when the bin holds no train points.
pub fn bin_ratio(train_count: usize, pooled_count: usize, n_tr: usize, n_te: f64) -> f64 {
    if train_count == 0 {
        0.0
    } else {
        (pooled_count as f64 / n_te) / (train_count as f64 / n_tr as f64)
    }
}

/// Estimate r̃ from counts on an arbitrary partition.
pub fn estimate_supremum_partition(
    train: &[Vec<f64>],
    pooled: &[Vec<f64>],
    num_clients: usize,
    partition: Partition,
) -> Result<SupremumEstimate> {
    if train.is_empty() || pooled.is_empty() {
        return Err(Error::InvalidArgument("train and pooled sets must be nonempty".into()));
    }
    if num_clients == 0 {
        return Err(Error::InvalidArgument("num_clients must be at least 1".into()));
    }
    let m = partition.num_cells();
    let mut tr = vec![0usize; m];
    let mut te = vec![0usize; m];
    for x in train {
        tr[partition.assign(x)] += 1;
    }
    for x in pooled {
        te[partition.assign(x)] += 1;
    }
    let n_te = pooled.len() as f64 / num_clients as f64;
    let bin_ratios: Vec<f64> = (0..m).map(|j| bin_ratio(tr[j], te[j], train.len(), n_te)).collect();
    let r_tilde = bin_ratios.iter().copied().fold(0.0, f64::max);
    if r_tilde <= 0.0 {
        return Err(Error::DegenerateBinning(
            "no bin holds both train and pooled test points".into(),
        ));
    }
    Ok(SupremumEstimate {
        r_tilde,
        c: 1.0 / r_tilde,
        gamma: 1.0,
        num_bins: m,
        bin_ratios,
        partition,
    })
}

fn all_points<'a>(train: &'a [Vec<f64>], pooled: &'a [Vec<f64>]) -> Vec<&'a [f64]> {
    train.iter().chain(pooled).map(|x| x.as_slice()).collect()
}

/// Equal-width grid over the joint bounding box (d <= 3).
pub fn estimate_supremum_histogram(
    train: &[Vec<f64>],
    pooled: &[Vec<f64>],
    num_clients: usize,
    bins: usize,
) -> Result<SupremumEstimate> {
    let partition = Partition::grid_over(&all_points(train, pooled), bins)?;
    estimate_supremum_partition(train, pooled, num_clients, partition)
}

/// Cells are the k-means clusters of train ∪ pooled.
pub fn estimate_supremum_kmeans(
    train: &[Vec<f64>],
    pooled: &[Vec<f64>],
    num_clients: usize,
    clusters: usize,
    iters: usize,
    seed: u64,
) -> Result<SupremumEstimate> {
    let centroids = kmeans(&all_points(train, pooled), clusters, iters, seed)?;
    estimate_supremum_partition(train, pooled, num_clients, Partition::Centroids { centroids })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub m: usize,
    pub r_tilde: f64,
}

/// k-means estimate at every cluster count in `ms`.
pub fn supremum_sweep(
    train: &[Vec<f64>],
    pooled: &[Vec<f64>],
    num_clients: usize,
    ms: &[usize],
    iters: usize,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    ms.iter()
        .map(|&m| {
            let est = estimate_supremum_kmeans(train, pooled, num_clients, m, iters, seed)?;
            Ok(SweepRow { m, r_tilde: est.r_tilde })
        })
        .collect()
}

/// Columns `M,r_tilde`.
pub fn write_sweep_csv<W: Write>(mut out: W, rows: &[SweepRow]) -> Result<()> {
    let io = |e: std::io::Error| Error::Io(e.to_string());
    writeln!(out, "M,r_tilde").map_err(io)?;
    for r in rows {
        writeln!(out, "{},{}", r.m, r.r_tilde).map_err(io)?;
    }
    Ok(())
}
