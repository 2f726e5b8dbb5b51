//! Federated orchestration: the shuffled test-pool broadcast, per-client
//! ratio assignment, synchronous weighted SGD rounds and the consistency
//! sweep.

mod consistency;
mod protocol;
mod ratios;
mod state;
mod training;

pub use consistency::{
    consistency_sweep, consistency_trial, ConsistencyRatios, ConsistencyReport, ConsistencyRow, DiscreteShiftFamily,
};
pub use protocol::{broadcast_shuffled_pool, DataFlowAudit};
pub use ratios::{assign_ratios, OracleKnowledge, RatioAssignment, RatioSource, TrainMode};
pub use state::{
    batch_indices, loss_for, run_round, sample_participants, Aggregation, ClientState, RoundLog, ServerHyper,
    ServerState, StepSchedule,
};
pub use training::{
    fit_client_ratios, run_training, write_round_log_csv, RatioPipeline, SupremumMethod, TrainingConfig,
    TrainingOutcome, TrainingSummary,
};
