//! Density-ratio estimation by non-negative Bregman-divergence matching.
//!
//! Client k fits `r_k(x) ≈ sum_l p_l^te(x) / p_k^tr(x)` from its own labelled
//! train features and the shuffled pool of every client's unlabelled test
//! features. The constant `C_k = 1 / r̃_k` comes from a histogram (or k-means)
//! estimate of the ratio's supremum.

mod model;
mod objective;
mod partition;
mod supremum;
mod train;
mod variant;

pub use model::{ConstantRatio, RatioFunction, RatioKind, RatioModel, RATIO_EPS};
pub use objective::{empirical_bd_risk, nnbd_gradient, nnbd_objective, NnbdGrad, NnbdParts};
pub use partition::{kmeans, nearest, Partition, MAX_GRID_DIM};
pub use supremum::{
    bin_ratio, estimate_supremum_histogram, estimate_supremum_kmeans, estimate_supremum_partition,
    supremum_sweep, write_sweep_csv, SupremumEstimate, SweepRow,
};
pub use train::{train_ratio_model, EpochLog, RatioArch, RatioHyper, TrainedRatio};
pub use variant::BregmanVariant;
