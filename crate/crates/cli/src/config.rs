use std::path::Path;

use anyhow::Result;
use fedshift::fed::{ConsistencyRatios, DiscreteShiftFamily, RatioPipeline, ServerHyper, TrainMode};
use fedshift::predictors::PredictorSpec;
use fedshift::synthdata::{
    fashion_mnist_five_client_counts, ratio_twenty_counts, two_client_fashion_mnist_counts, BaseGenerator,
    ClientCounts, CountTable, ShiftScenario,
};
use serde::{Deserialize, Serialize};

/// Raised for anything wrong with the configuration itself; maps to exit
/// code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub scenario: Option<ScenarioConfig>,
    #[serde(default = "default_modes")]
    pub modes: Vec<ModeName>,
    /// Required when `modes` contains `focused`.
    pub focus: Option<FocusConfig>,
    pub predictor: Option<PredictorSpec>,
    #[serde(default)]
    pub server: ServerHyper,
    #[serde(default = "default_ratios")]
    pub ratios: RatioPipeline,
    #[serde(default)]
    pub ratio_fit: RatioFitConfig,
    #[serde(default)]
    pub consistency: ConsistencyConfig,
    #[serde(default)]
    pub eigen: EigenConfig,
}

fn default_name() -> String {
    "experiment".into()
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_modes() -> Vec<ModeName> {
    vec![ModeName::Ftw, ModeName::Fitw, ModeName::Fedavg]
}
fn default_ratios() -> RatioPipeline {
    RatioPipeline::Oracle
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Ftw,
    Fitw,
    Fedavg,
    Focused,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FocusConfig {
    pub target: usize,
    /// Defaults to uniform weights.
    pub lambdas: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub counts: CountSpec,
    pub generator: BaseGenerator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "table", rename_all = "snake_case", deny_unknown_fields)]
pub enum CountSpec {
    /// Five clients, ten classes, each client's train data dominated by one
    /// class and its test data by another.
    FashionFive {
        #[serde(default = "one")]
        scale: f64,
    },
    FashionTwo {
        #[serde(default = "one")]
        scale: f64,
    },
    /// One client with a maximal class ratio of 20.
    RatioTwenty { per_major_class: usize },
    /// Explicit per-client class counts. Omitted `test_eval` copies `test_pool`.
    Custom { clients: Vec<ClientCounts> },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatioFitConfig {
    pub mode: ModeName,
    /// Cluster counts for the supremum sweep.
    pub sweep_m: Vec<usize>,
    pub kmeans_iters: usize,
}

impl Default for RatioFitConfig {
    fn default() -> Self {
        Self { mode: ModeName::Ftw, sweep_m: vec![10, 20, 40, 50, 100], kmeans_iters: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConsistencyConfig {
    pub family: DiscreteShiftFamily,
    pub modes: Vec<ModeName>,
    pub ratios: Vec<ConsistencyRatios>,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
}

impl Default for ConsistencyConfig {
    fn default() -> Self {
        Self {
            family: DiscreteShiftFamily::skewed_three_client(),
            modes: default_modes(),
            ratios: vec![ConsistencyRatios::Oracle],
            n_grid: vec![100, 1000, 10_000],
            replicates: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigenConfig {
    /// Ridge penalty entering the per-eigenvalue bound.
    pub lambda: f64,
}

impl Default for EigenConfig {
    fn default() -> Self {
        Self { lambda: 1.0 }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| config_error(format!("reading {}: {e}", path.display())))?;
        let cfg: Self = toml::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(config_error("at least one seed is required"));
        }
        if self.modes.contains(&ModeName::Focused) && self.focus.is_none() {
            return Err(config_error("mode `focused` needs a [focus] section"));
        }
        Ok(())
    }

    pub fn scenario_section(&self) -> Result<&ScenarioConfig> {
        self.scenario.as_ref().ok_or_else(|| config_error("missing [scenario] section"))
    }

    pub fn predictor_section(&self) -> Result<&PredictorSpec> {
        self.predictor.as_ref().ok_or_else(|| config_error("missing [predictor] section"))
    }

    /// The scenario with data drawn from `seed`.
    pub fn scenario(&self, seed: u64) -> Result<ShiftScenario> {
        let sc = self.scenario_section()?;
        let counts = match &sc.counts {
            CountSpec::FashionFive { scale } => scaled(fashion_mnist_five_client_counts(), *scale)?,
            CountSpec::FashionTwo { scale } => scaled(two_client_fashion_mnist_counts(), *scale)?,
            CountSpec::RatioTwenty { per_major_class } => {
                ratio_twenty_counts(*per_major_class).map_err(|e| config_error(e.to_string()))?
            }
            CountSpec::Custom { clients } => CountTable::new(
                clients
                    .iter()
                    .map(|c| {
                        let mut c = c.clone();
                        if c.test_eval.is_empty() {
                            c.test_eval = c.test_pool.clone();
                        }
                        c
                    })
                    .collect(),
            ),
        };
        ShiftScenario::new(counts, sc.generator.clone(), seed).map_err(|e| config_error(e.to_string()))
    }

    pub fn train_mode(&self, name: ModeName, num_clients: usize) -> Result<TrainMode> {
        Ok(match name {
            ModeName::Ftw => TrainMode::Ftw,
            ModeName::Fitw => TrainMode::Fitw,
            ModeName::Fedavg => TrainMode::Fedavg,
            ModeName::Focused => {
                let f = self.focus.as_ref().ok_or_else(|| config_error("mode `focused` needs a [focus] section"))?;
                let lambdas = f
                    .lambdas
                    .clone()
                    .unwrap_or_else(|| vec![1.0 / num_clients as f64; num_clients]);
                let mode = TrainMode::Focused { target: f.target, lambdas };
                mode.validate(num_clients).map_err(|e| config_error(e.to_string()))?;
                mode
            }
        })
    }
}

fn scaled(table: CountTable, scale: f64) -> Result<CountTable> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(config_error(format!("scale must be positive, got {scale}")));
    }
    Ok(if scale == 1.0 { table } else { table.scaled(scale) })
}
