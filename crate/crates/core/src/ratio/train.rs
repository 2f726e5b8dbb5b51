use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::{RatioKind, RatioModel, RATIO_EPS};
use super::objective::{empirical_bd_risk, nnbd_gradient};
use super::partition::Partition;
use super::supremum::SupremumEstimate;
use super::variant::BregmanVariant;
use crate::error::{Error, Result};
use crate::optim::{Optimizer, OptimizerKind};
use crate::rng::{self, StreamTag};

/// Architecture of the ratio model to train.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RatioArch {
    /// Piecewise-constant on nearest-centroid cells. Without explicit
    /// centroids the cells of a k-means supremum estimate are reused.
    ClassTable {
        #[serde(default)]
        centroids: Option<Vec<Vec<f64>>>,
    },
    LinearSoftplus,
    MlpSoftplus {
        #[serde(default = "default_hidden")]
        hidden: usize,
    },
}

fn default_hidden() -> usize {
    16
}

impl RatioArch {
    pub fn to_kind(&self, dim: usize, sup: &SupremumEstimate) -> Result<RatioKind> {
        Ok(match self {
            RatioArch::ClassTable { centroids: Some(c) } => RatioKind::ClassTable { centroids: c.clone() },
            RatioArch::ClassTable { centroids: None } => match &sup.partition {
                Partition::Centroids { centroids } => RatioKind::ClassTable { centroids: centroids.clone() },
                Partition::Grid { .. } => {
                    return Err(Error::Configuration(
                        "class-table ratio needs centroids or a k-means supremum estimate".into(),
                    ))
                }
            },
            RatioArch::LinearSoftplus => RatioKind::LinearSoftplus { dim },
            RatioArch::MlpSoftplus { hidden } => RatioKind::MlpSoftplus { dim, hidden: *hidden },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatioHyper {
    pub lr: f64,
    pub batch_train: usize,
    pub batch_test: usize,
    pub max_epochs: usize,
    /// Coefficient of the squared-norm penalty on the parameters.
    pub reg: f64,
    /// Stop after this many epochs without held-out improvement.
    pub patience: usize,
    pub holdout_frac: f64,
    pub optimizer: OptimizerKind,
    /// Output ceiling as a multiple of r̃.
    pub r_max_factor: f64,
}

impl Default for RatioHyper {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            batch_train: 64,
            batch_test: 64,
            max_epochs: 200,
            reg: 1e-4,
            patience: 5,
            holdout_frac: 0.2,
            optimizer: OptimizerKind::Sgd,
            r_max_factor: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_objective: f64,
    pub holdout_risk: f64,
}

/// A fitted ratio together with the constants it was trained against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedRatio {
    pub variant: BregmanVariant,
    pub model: RatioModel,
    pub c: f64,
    pub r_tilde: f64,
    pub num_clients: usize,
    pub best_epoch: usize,
    pub history: Vec<EpochLog>,
}

fn split_holdout(
    xs: &[Vec<f64>],
    frac: f64,
    rng: &mut rng::StreamRng,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.shuffle(rng);
    let n_hold = ((xs.len() as f64) * frac).floor() as usize;
    // Keep at least one point to fit on; tiny sets are evaluated in-sample.
    if n_hold == 0 || n_hold >= xs.len() {
        return (xs.to_vec(), xs.to_vec());
    }
    let hold = idx[..n_hold].iter().map(|&i| xs[i].clone()).collect();
    let fit = idx[n_hold..].iter().map(|&i| xs[i].clone()).collect();
    (fit, hold)
}

/// Fit client k's ratio with the nnBD objective.
///
/// Each step draws a train batch and a pooled-test batch. When the bracket is
/// nonnegative the full objective plus penalty is descended; otherwise the
/// bracket is ascended (pushing it back to zero) while the penalty is still
/// descended. The parameters with the best held-out BD risk are returned.
#[allow(clippy::too_many_arguments)]
pub fn train_ratio_model(
    variant: BregmanVariant,
    train: &[Vec<f64>],
    pooled: &[Vec<f64>],
    num_clients: usize,
    sup: &SupremumEstimate,
    arch: &RatioArch,
    hyper: &RatioHyper,
    seed: u64,
) -> Result<TrainedRatio> {
    if train.is_empty() || pooled.is_empty() {
        return Err(Error::InvalidArgument("ratio training needs train and pooled samples".into()));
    }
    if hyper.batch_train == 0 || hyper.batch_test == 0 || !(hyper.lr > 0.0) {
        return Err(Error::Configuration("batch sizes and learning rate must be positive".into()));
    }
    if !(0.0..1.0).contains(&hyper.holdout_frac) {
        return Err(Error::Configuration("holdout_frac must lie in [0, 1)".into()));
    }
    let dim = train[0].len();
    let mut r_max = hyper.r_max_factor * sup.r_tilde;
    if let Some(ub) = variant.upper_bound() {
        r_max = r_max.min(ub - RATIO_EPS);
    }
    let c = sup.c;
    let mut model = RatioModel::new(arch.to_kind(dim, sup)?, r_max, seed)?;

    let mut rng = rng::stream(seed, StreamTag::RatioTraining, 0);
    let (fit_tr, hold_tr) = split_holdout(train, hyper.holdout_frac, &mut rng);
    let (fit_te, hold_te) = split_holdout(pooled, hyper.holdout_frac, &mut rng);

    let holdout = |m: &RatioModel| empirical_bd_risk(variant, m, c, num_clients, &hold_tr, &hold_te);
    let mut best = model.clone();
    let mut best_risk = holdout(&model)?;
    let mut best_epoch = 0;
    let mut history = vec![EpochLog { epoch: 0, mean_objective: f64::NAN, holdout_risk: best_risk }];

    let mut opt = Optimizer::new(hyper.optimizer, model.params.len());
    let mut tr_order: Vec<usize> = (0..fit_tr.len()).collect();
    let mut te_order: Vec<usize> = (0..fit_te.len()).collect();
    te_order.shuffle(&mut rng);
    let mut te_cursor = 0;
    let steps = fit_tr.len().div_ceil(hyper.batch_train);
    let mut stale = 0;

    for epoch in 1..=hyper.max_epochs {
        tr_order.shuffle(&mut rng);
        let mut obj_sum = 0.0;
        for step in 0..steps {
            let lo = step * hyper.batch_train;
            let hi = (lo + hyper.batch_train).min(fit_tr.len());
            let tb: Vec<Vec<f64>> = tr_order[lo..hi].iter().map(|&i| fit_tr[i].clone()).collect();
            let mut eb = Vec::with_capacity(hyper.batch_test);
            for _ in 0..hyper.batch_test {
                if te_cursor == te_order.len() {
                    te_order.shuffle(&mut rng);
                    te_cursor = 0;
                }
                eb.push(fit_te[te_order[te_cursor]].clone());
                te_cursor += 1;
            }

            let g = nnbd_gradient(variant, &model, c, num_clients, &tb, &eb)?;
            let value = g.parts.value();
            if !value.is_finite() || !g.parts.bracket.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    step,
                    detail: format!("objective {value}, bracket {}; lower the learning rate", g.parts.bracket),
                });
            }
            obj_sum += value;
            let descent: Vec<f64> = if g.parts.bracket >= 0.0 {
                (0..model.params.len())
                    .map(|j| g.d_bracket[j] + g.d_ell2_term[j] + hyper.reg * model.params[j])
                    .collect()
            } else {
                (0..model.params.len())
                    .map(|j| -g.d_bracket[j] + hyper.reg * model.params[j])
                    .collect()
            };
            opt.step(&mut model.params, &descent, hyper.lr);
        }

        let risk = holdout(&model)?;
        if !risk.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                step: steps,
                detail: format!("held-out BD risk {risk}"),
            });
        }
        history.push(EpochLog { epoch, mean_objective: obj_sum / steps as f64, holdout_risk: risk });
        if risk < best_risk {
            best_risk = risk;
            best = model.clone();
            best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= hyper.patience {
                break;
            }
        }
    }

    Ok(TrainedRatio {
        variant,
        model: best,
        c,
        r_tilde: sup.r_tilde,
        num_clients,
        best_epoch,
        history,
    })
}
