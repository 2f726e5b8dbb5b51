use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ratios::RatioAssignment;
use crate::error::{Error, Result};
use crate::optim::{Optimizer, OptimizerKind};
use crate::predictors::{weighted_loss_and_grad, LossKind, Predictor, PredictorSpec, WeightedBatch};
use crate::rng::{self, StreamTag};
use crate::synthdata::DatasetSplit;

#[derive(Debug, Clone, PartialEq)]
pub struct ClientState {
    pub id: usize,
    pub data: DatasetSplit,
    pub assignment: RatioAssignment,
    /// One weight per training example, aligned with `data.train`.
    pub weights: Vec<f64>,
}

impl ClientState {
    /// Unit weights until [`assign_ratios`](super::assign_ratios) runs.
    pub fn new(data: DatasetSplit) -> Self {
        Self {
            id: data.client_id,
            weights: vec![1.0; data.train.len()],
            assignment: RatioAssignment::Unit,
            data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSchedule {
    #[default]
    Constant,
    /// `lr / sqrt(t + 1)`.
    InvSqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Plain sum of client gradients.
    #[default]
    Sum,
    /// Divide the sum by the number of participants.
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerHyper {
    /// Falls back to 0.05 for linear and logistic models, 0.01 for MLPs.
    pub lr: Option<f64>,
    pub schedule: StepSchedule,
    pub aggregation: Aggregation,
    /// Fraction of clients sampled each round, in (0, 1].
    pub participation: f64,
    /// Per-client mini-batch size; 0 means the full local set.
    pub batch_size: usize,
    pub rounds: usize,
    pub optimizer: OptimizerKind,
    /// Evaluate every this many rounds (the last round is always evaluated);
    /// 0 evaluates only at the end.
    pub eval_every: usize,
}

impl Default for ServerHyper {
    fn default() -> Self {
        Self {
            lr: None,
            schedule: StepSchedule::Constant,
            aggregation: Aggregation::Sum,
            participation: 1.0,
            batch_size: 32,
            rounds: 500,
            optimizer: OptimizerKind::Sgd,
            eval_every: 0,
        }
    }
}

impl ServerHyper {
    pub fn base_lr(&self, spec: &PredictorSpec) -> f64 {
        self.lr.unwrap_or(match spec {
            PredictorSpec::Mlp { .. } => 0.01,
            _ => 0.05,
        })
    }

    pub fn validate(&self, spec: &PredictorSpec) -> Result<()> {
        let lr = self.base_lr(spec);
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::Configuration(format!("learning rate must be positive, got {lr}")));
        }
        if !(self.participation > 0.0 && self.participation <= 1.0) {
            return Err(Error::Configuration(format!(
                "participation must lie in (0, 1], got {}",
                self.participation
            )));
        }
        Ok(())
    }
}

/// Squared loss for scalar regressors, cross-entropy for classifiers.
pub fn loss_for(spec: &PredictorSpec) -> LossKind {
    match spec {
        PredictorSpec::Linear { .. } => LossKind::Squared,
        PredictorSpec::Logistic { .. } => LossKind::CrossEntropy,
        PredictorSpec::Mlp { outputs, .. } if *outputs == 1 => LossKind::Squared,
        PredictorSpec::Mlp { .. } => LossKind::CrossEntropy,
    }
}

pub struct ServerState {
    pub model: Predictor,
    pub round: usize,
    pub hyper: ServerHyper,
    pub loss: LossKind,
    base_lr: f64,
    optimizer: Optimizer,
}

impl ServerState {
    pub fn new(model: Predictor, hyper: ServerHyper) -> Result<Self> {
        hyper.validate(&model.spec)?;
        Ok(Self {
            loss: loss_for(&model.spec),
            base_lr: hyper.base_lr(&model.spec),
            optimizer: Optimizer::new(hyper.optimizer, model.params.len()),
            round: 0,
            hyper,
            model,
        })
    }

    pub fn step_size(&self, t: usize) -> f64 {
        match self.hyper.schedule {
            StepSchedule::Constant => self.base_lr,
            StepSchedule::InvSqrt => self.base_lr / ((t + 1) as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: usize,
    pub participants: Vec<usize>,
    pub grad_norms: Vec<f64>,
    /// Mean weighted batch loss over participants, before the update.
    pub avg_loss: f64,
    /// Per-client accuracy on held-out data, on evaluation rounds only.
    pub accuracies: Option<Vec<f64>>,
}

impl RoundLog {
    pub fn avg_accuracy(&self) -> Option<f64> {
        self.accuracies
            .as_ref()
            .map(|a| a.iter().sum::<f64>() / a.len() as f64)
    }
}

/// Sorted ids of the clients taking part in round `t`.
pub fn sample_participants(num_clients: usize, fraction: f64, seed: u64, t: usize) -> Vec<usize> {
    let m = ((fraction * num_clients as f64).round() as usize).clamp(1, num_clients.max(1));
    if m >= num_clients {
        return (0..num_clients).collect();
    }
    let mut rng = rng::stream(seed, StreamTag::Participation, t as u64);
    let mut ids = index::sample(&mut rng, num_clients, m).into_vec();
    ids.sort_unstable();
    ids
}

/// Indices of client `k`'s mini-batch in round `t`, drawn without replacement
/// from a stream owned by that (client, round) pair.
pub fn batch_indices(n: usize, batch_size: usize, seed: u64, k: usize, t: usize) -> Vec<usize> {
    if batch_size == 0 || batch_size >= n {
        return (0..n).collect();
    }
    let client_seed = rng::derive_seed(seed, StreamTag::Client, k as u64);
    let mut rng = rng::stream(client_seed, StreamTag::Batch, t as u64);
    index::sample(&mut rng, n, batch_size).into_vec()
}

/// One synchronous round: sampled clients compute weighted mini-batch
/// gradients in parallel, the server sums them in ascending id order and
/// takes a step.
pub fn run_round(server: &mut ServerState, clients: &[ClientState], seed: u64) -> Result<RoundLog> {
    let t = server.round;
    let participants = sample_participants(clients.len(), server.hyper.participation, seed, t);
    let model = &server.model;
    let (batch_size, loss) = (server.hyper.batch_size, server.loss);

    let results: Vec<(f64, Vec<f64>)> = participants
        .par_iter()
        .map(|&k| {
            let c = &clients[k];
            let idx = batch_indices(c.data.train.len(), batch_size, seed, c.id, t);
            let batch = WeightedBatch::new(
                idx.iter().map(|&i| &c.data.train[i]).collect(),
                idx.iter().map(|&i| c.weights[i]).collect(),
            )?;
            let (l, g) = weighted_loss_and_grad(model, &batch, loss)?;
            if !l.is_finite() || g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient { client_id: c.id, round: t });
            }
            Ok((l, g))
        })
        .collect::<Result<_>>()?;

    let mut agg = vec![0.0; model.params.len()];
    for (_, g) in &results {
        for (a, v) in agg.iter_mut().zip(g) {
            *a += v;
        }
    }
    if server.hyper.aggregation == Aggregation::Mean {
        let m = results.len() as f64;
        agg.iter_mut().for_each(|a| *a /= m);
    }
    let eta = server.step_size(t);
    server.optimizer.step(&mut server.model.params, &agg, eta);
    server.round += 1;

    Ok(RoundLog {
        round: t,
        grad_norms: results.iter().map(|(_, g)| g.iter().map(|v| v * v).sum::<f64>().sqrt()).collect(),
        avg_loss: results.iter().map(|(l, _)| l).sum::<f64>() / results.len() as f64,
        participants,
        accuracies: None,
    })
}
