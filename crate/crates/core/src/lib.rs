//! Importance-weighted federated learning under covariate and target shift.
//!
//! The crate is organised bottom-up:
//!
//! - [`synthdata`]: multi-client synthetic scenarios with controlled target and
//!   covariate shift, plus exact density-ratio oracles for them.
//! - [`ratio`]: non-negative Bregman-divergence density-ratio matching with a
//!   histogram / k-means estimate of the ratio supremum.
//! - [`predictors`]: linear, logistic and MLP predictors with importance-weighted
//!   losses and gradients.
//! - [`fed`]: the federated protocol (shuffled test-pool broadcast, ratio
//!   assignment, synchronous SGD rounds) and the consistency sweep.
//! - [`ridge`]: closed-form weighted ridge regression, bias/variance
//!   decomposition and the one-hot dominance conditions.

// Negated float comparisons deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod fed;
pub mod optim;
pub mod predictors;
pub mod ratio;
pub mod ridge;
pub mod rng;
pub mod synthdata;

pub use error::{Error, Result};
