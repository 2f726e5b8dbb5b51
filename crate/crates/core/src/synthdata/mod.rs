//! Synthetic multi-client datasets with controlled target and covariate shift.
//!
//! Target-shift scenarios draw class-conditional features from a
//! [`BaseGenerator`] whose classes occupy disjoint regions of feature space, so
//! the density ratio of any two label distributions can be read off the label
//! (see [`exact_ratio_target_shift`]).

mod export;
mod gaussian;
mod generator;
mod proportions;
mod scenario;

use serde::{Deserialize, Serialize};

pub use export::write_splits_csv;
pub use gaussian::{gaussian_shift_pair, GaussianRatio, GaussianShiftPair};
pub use generator::{BaseGenerator, GaussianClusters};
pub use proportions::{sample_one_hot, ClassProportions};
pub use scenario::{
    exact_combined_ratio, exact_ratio_target_shift, fashion_mnist_five_client_counts,
    allocate_from_pools, make_target_shift_scenario, ratio_twenty_counts, two_client_fashion_mnist_counts,
    ClientCounts, CountTable, ShiftScenario,
};

/// Target attached to a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Label {
    Class(usize),
    Real(f64),
}

impl Label {
    pub fn class(&self) -> Option<usize> {
        match *self {
            Label::Class(c) => Some(c),
            Label::Real(_) => None,
        }
    }

    pub fn real(&self) -> Option<f64> {
        match *self {
            Label::Real(v) => Some(v),
            Label::Class(_) => None,
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Label::Class(c) => write!(f, "{c}"),
            Label::Real(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    pub label: Label,
}

impl LabeledSample {
    pub fn new(features: Vec<f64>, label: Label) -> Self {
        Self { features, label }
    }
}

/// Everything one client holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub client_id: usize,
    /// Labeled training data (n_k^tr samples).
    pub train: Vec<LabeledSample>,
    /// Unlabeled test features the client contributes to the shared pool.
    pub test_pool: Vec<Vec<f64>>,
    /// Held-out labeled test data used only for reporting accuracy.
    pub test_eval: Vec<LabeledSample>,
}

impl DatasetSplit {
    pub fn train_features(&self) -> Vec<Vec<f64>> {
        self.train.iter().map(|s| s.features.clone()).collect()
    }

    pub fn feature_dim(&self) -> Option<usize> {
        self.train.first().map(|s| s.features.len())
    }
}
