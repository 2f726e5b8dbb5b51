use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::protocol::{broadcast_shuffled_pool, DataFlowAudit};
use super::ratios::{assign_ratios, OracleKnowledge, RatioSource, TrainMode};
use super::state::{run_round, ClientState, RoundLog, ServerHyper, ServerState};
use crate::error::{Error, Result};
use crate::predictors::{accuracy, weighted_loss, Predictor, PredictorSpec, WeightedBatch};
use crate::ratio::{
    estimate_supremum_histogram, estimate_supremum_kmeans, train_ratio_model, BregmanVariant, RatioArch, RatioHyper,
    SupremumEstimate, TrainedRatio,
};
use crate::rng::{self, StreamTag};
use crate::synthdata::{DatasetSplit, ShiftScenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SupremumMethod {
    Histogram { bins: usize },
    Kmeans {
        clusters: usize,
        #[serde(default = "default_kmeans_iters")]
        iters: usize,
    },
}

fn default_kmeans_iters() -> usize {
    50
}

impl SupremumMethod {
    pub fn estimate(&self, train: &[Vec<f64>], pooled: &[Vec<f64>], num_clients: usize, seed: u64) -> Result<SupremumEstimate> {
        match self {
            SupremumMethod::Histogram { bins } => estimate_supremum_histogram(train, pooled, num_clients, *bins),
            SupremumMethod::Kmeans { clusters, iters } => {
                estimate_supremum_kmeans(train, pooled, num_clients, *clusters, *iters, seed)
            }
        }
    }
}

/// Where the importance weights come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum RatioPipeline {
    /// Exact ratios from the scenario's label proportions.
    Oracle,
    /// Estimate r̃ and fit one nnBD model per client.
    Trained {
        variant: BregmanVariant,
        supremum: SupremumMethod,
        arch: RatioArch,
        #[serde(default)]
        hyper: RatioHyper,
        /// C = gamma / r̃.
        #[serde(default = "default_gamma")]
        gamma: f64,
    },
}

fn default_gamma() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    #[serde(default)]
    pub server: ServerHyper,
    pub ratios: RatioPipeline,
    /// Worker threads; `None` uses the global rayon pool.
    #[serde(default)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub mode: String,
    pub per_client_accuracy: Vec<f64>,
    pub average: f64,
    pub worst: f64,
    pub best: f64,
    /// Unweighted loss on each client's held-out test set.
    pub per_client_test_loss: Vec<f64>,
}

impl TrainingSummary {
    fn new(mode: &TrainMode, acc: Vec<f64>, test_loss: Vec<f64>) -> Self {
        let average = acc.iter().sum::<f64>() / acc.len() as f64;
        let worst = acc.iter().copied().fold(f64::INFINITY, f64::min);
        let best = acc.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self {
            mode: mode.name().into(),
            per_client_accuracy: acc,
            average,
            worst,
            best,
            per_client_test_loss: test_loss,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub predictor: Predictor,
    pub logs: Vec<RoundLog>,
    pub summary: TrainingSummary,
    /// Fitted ratio models, empty unless the pipeline trains them.
    pub ratio_models: Vec<TrainedRatio>,
    /// Cross-client flows seen while assigning ratios.
    pub cross_client_flows: usize,
}

/// Fit every client's ratio model for `mode`.
///
/// FTW clients see the shuffled pool of all clients' test features; FITW
/// clients see only their own train and test features and train as a
/// one-client federation.
pub fn fit_client_ratios(
    splits: &[DatasetSplit],
    mode: &TrainMode,
    pipeline: &RatioPipeline,
    audit: &DataFlowAudit,
    seed: u64,
) -> Result<Vec<TrainedRatio>> {
    let RatioPipeline::Trained { variant, supremum, arch, hyper, gamma } = pipeline else {
        return Err(Error::Configuration("oracle ratios are not fitted".into()));
    };
    let k_total = splits.len();
    let shared_pool = match mode {
        TrainMode::Ftw => Some(broadcast_shuffled_pool(splits, rng::derive_seed(seed, StreamTag::Shuffle, 0))?),
        TrainMode::Fitw => None,
        TrainMode::Fedavg => return Ok(Vec::new()),
        TrainMode::Focused { .. } => {
            return Err(Error::Configuration(
                "focused mode is only available with oracle ratios".into(),
            ))
        }
    };
    for s in splits {
        match &shared_pool {
            Some(_) => audit.record(s.client_id, 0..k_total),
            None => audit.record(s.client_id, [s.client_id]),
        }
    }
    splits
        .par_iter()
        .map(|s| {
            let train = s.train_features();
            let (pooled, k_eff) = match &shared_pool {
                Some(p) => (p.as_slice(), k_total),
                None => (s.test_pool.as_slice(), 1),
            };
            let client_seed = rng::derive_seed(seed, StreamTag::RatioTraining, s.client_id as u64);
            let sup = supremum
                .estimate(&train, pooled, k_eff, rng::derive_seed(client_seed, StreamTag::KMeans, 0))?
                .with_gamma(*gamma)?;
            train_ratio_model(*variant, &train, pooled, k_eff, &sup, arch, hyper, client_seed)
        })
        .collect()
}

fn oracle_knowledge(scenario: &ShiftScenario) -> Result<OracleKnowledge> {
    let k = scenario.num_clients();
    Ok(OracleKnowledge {
        train: (0..k).map(|i| scenario.train_proportions(i)).collect::<Result<_>>()?,
        test: (0..k).map(|i| scenario.test_proportions(i)).collect::<Result<_>>()?,
    })
}

fn evaluate(model: &Predictor, clients: &[ClientState]) -> Result<Vec<f64>> {
    clients.par_iter().map(|c| accuracy(model, &c.data.test_eval)).collect()
}

/// The whole pipeline: generate data, broadcast and fit ratios when needed,
/// assign weights, then run the configured number of rounds.
pub fn run_training(
    scenario: &ShiftScenario,
    mode: &TrainMode,
    spec: &PredictorSpec,
    config: &TrainingConfig,
    seed: u64,
) -> Result<TrainingOutcome> {
    match config.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Configuration(format!("thread pool: {e}")))?
            .install(|| run_training_inner(scenario, mode, spec, config, seed)),
        None => run_training_inner(scenario, mode, spec, config, seed),
    }
}

fn run_training_inner(
    scenario: &ShiftScenario,
    mode: &TrainMode,
    spec: &PredictorSpec,
    config: &TrainingConfig,
    seed: u64,
) -> Result<TrainingOutcome> {
    mode.validate(scenario.num_clients())?;
    if spec.input_dim() != scenario.generator.feature_dim() {
        return Err(Error::Configuration(format!(
            "predictor expects {} features, scenario produces {}",
            spec.input_dim(),
            scenario.generator.feature_dim()
        )));
    }
    let splits = scenario.generate()?;
    let audit = DataFlowAudit::new();
    let (ratio_models, knowledge) = match &config.ratios {
        RatioPipeline::Oracle => (Vec::new(), Some(oracle_knowledge(scenario)?)),
        trained => (fit_client_ratios(&splits, mode, trained, &audit, seed)?, None),
    };
    let mut clients: Vec<ClientState> = splits.into_iter().map(ClientState::new).collect();
    let source = match &knowledge {
        Some(k) => RatioSource::Oracle(k),
        None => RatioSource::Trained(&ratio_models),
    };
    assign_ratios(&mut clients, mode, &source, &audit)?;

    let model = Predictor::new(spec.clone(), rng::derive_seed(seed, StreamTag::Init, 0));
    let mut server = ServerState::new(model, config.server.clone())?;
    let rounds = config.server.rounds;
    let every = config.server.eval_every;
    let mut logs = Vec::with_capacity(rounds);
    for t in 0..rounds {
        let mut log = run_round(&mut server, &clients, seed)?;
        if t + 1 == rounds || (every > 0 && (t + 1) % every == 0) {
            log.accuracies = Some(evaluate(&server.model, &clients)?);
        }
        logs.push(log);
    }

    let acc = match logs.last().and_then(|l| l.accuracies.clone()) {
        Some(a) => a,
        None => evaluate(&server.model, &clients)?,
    };
    let test_loss = clients
        .iter()
        .map(|c| weighted_loss(&server.model, &WeightedBatch::unit(&c.data.test_eval), server.loss))
        .collect::<Result<_>>()?;
    Ok(TrainingOutcome {
        summary: TrainingSummary::new(mode, acc, test_loss),
        predictor: server.model,
        logs,
        ratio_models,
        cross_client_flows: audit.cross_client(),
    })
}

/// Round log as CSV: `round,mode,avg_loss,avg_acc,acc_0..acc_{K-1}`.
/// Accuracy cells are empty on rounds without evaluation.
pub fn write_round_log_csv<W: Write>(out: W, mode: &TrainMode, num_clients: usize, logs: &[RoundLog]) -> Result<()> {
    let io = |e: csv::Error| Error::Io(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["round".to_string(), "mode".into(), "avg_loss".into(), "avg_acc".into()];
    header.extend((0..num_clients).map(|k| format!("acc_{k}")));
    w.write_record(&header).map_err(io)?;
    for log in logs {
        let mut row = vec![log.round.to_string(), mode.name().into(), log.avg_loss.to_string()];
        match &log.accuracies {
            Some(a) => {
                row.push(log.avg_accuracy().unwrap_or(f64::NAN).to_string());
                row.extend(a.iter().map(f64::to_string));
            }
            None => row.extend(std::iter::repeat_n(String::new(), num_clients + 1)),
        }
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}
