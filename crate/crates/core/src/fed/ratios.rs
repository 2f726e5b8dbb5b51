use serde::{Deserialize, Serialize};

use super::protocol::DataFlowAudit;
use super::state::ClientState;
use crate::error::{Error, Result};
use crate::ratio::TrainedRatio;
use crate::synthdata::{exact_ratio_target_shift, ClassProportions, Label};

/// Which risk the per-example weights target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrainMode {
    /// `sum_l p_l^te / p_k^tr`: average test risk over all clients.
    Ftw,
    /// `p_k^te / p_k^tr`: each client corrects only its own shift.
    Fitw,
    /// Unit weights.
    Fedavg,
    /// `lambdas[k] p_target^te / p_k^tr`: test risk of one client.
    Focused { target: usize, lambdas: Vec<f64> },
}

impl TrainMode {
    pub fn name(&self) -> &'static str {
        match self {
            TrainMode::Ftw => "ftw",
            TrainMode::Fitw => "fitw",
            TrainMode::Fedavg => "fedavg",
            TrainMode::Focused { .. } => "focused",
        }
    }

    pub fn validate(&self, num_clients: usize) -> Result<()> {
        if let TrainMode::Focused { target, lambdas } = self {
            if *target >= num_clients || lambdas.len() != num_clients {
                return Err(Error::Configuration(format!(
                    "focused mode needs a target below {num_clients} and one lambda per client"
                )));
            }
            if lambdas.iter().any(|l| !l.is_finite() || *l < 0.0) {
                return Err(Error::Configuration("focus weights must be nonnegative".into()));
            }
        }
        Ok(())
    }
}

/// Label distributions a client's oracle may consult: its own train
/// distribution and every client's test distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleKnowledge {
    pub train: Vec<ClassProportions>,
    pub test: Vec<ClassProportions>,
}

pub enum RatioSource<'a> {
    /// Exact ratios from label proportions (separable target shift).
    Oracle(&'a OracleKnowledge),
    /// One fitted model per client, trained for the requested mode.
    Trained(&'a [TrainedRatio]),
    /// Unit weights regardless of mode.
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioAssignment {
    Unit,
    Exact,
    Trained,
}

fn class_of(label: &Label) -> Result<usize> {
    label
        .class()
        .ok_or_else(|| Error::Configuration("oracle ratios need class labels".into()))
}

/// Fill every client's cached per-example weights.
///
/// Each client only ever sees the statistics its mode requires, and every such
/// access is logged in `audit`: FITW reads nothing but the client's own
/// distributions.
pub fn assign_ratios(
    clients: &mut [ClientState],
    mode: &TrainMode,
    source: &RatioSource,
    audit: &DataFlowAudit,
) -> Result<()> {
    let k_total = clients.len();
    mode.validate(k_total)?;
    for c in clients.iter_mut() {
        let k = c.id;
        let (weights, assignment) = match (mode, source) {
            (TrainMode::Fedavg, _) | (_, RatioSource::Unit) => (vec![1.0; c.data.train.len()], RatioAssignment::Unit),
            (_, RatioSource::Oracle(know)) => {
                let q_tr = know
                    .train
                    .get(k)
                    .ok_or_else(|| Error::Configuration(format!("no train distribution for client {k}")))?;
                let w = match mode {
                    TrainMode::Fitw => {
                        audit.record(k, [k]);
                        let q_te = &know.test[k];
                        c.data
                            .train
                            .iter()
                            .map(|s| exact_ratio_target_shift(q_tr, q_te, class_of(&s.label)?))
                            .collect::<Result<Vec<_>>>()?
                    }
                    TrainMode::Ftw => {
                        audit.record(k, 0..k_total);
                        c.data
                            .train
                            .iter()
                            .map(|s| {
                                let y = class_of(&s.label)?;
                                know.test.iter().map(|q_te| exact_ratio_target_shift(q_tr, q_te, y)).sum()
                            })
                            .collect::<Result<Vec<_>>>()?
                    }
                    TrainMode::Focused { target, lambdas } => {
                        audit.record(k, [*target]);
                        let q_te = &know.test[*target];
                        c.data
                            .train
                            .iter()
                            .map(|s| Ok(lambdas[k] * exact_ratio_target_shift(q_tr, q_te, class_of(&s.label)?)?))
                            .collect::<Result<Vec<_>>>()?
                    }
                    TrainMode::Fedavg => unreachable!(),
                };
                (w, RatioAssignment::Exact)
            }
            (TrainMode::Focused { .. }, RatioSource::Trained(_)) => {
                return Err(Error::Configuration(
                    "focused mode is only available with oracle ratios".into(),
                ))
            }
            (_, RatioSource::Trained(models)) => {
                let m = models
                    .get(k)
                    .ok_or_else(|| Error::Configuration(format!("missing ratio model for client {k}")))?;
                let ceiling = 2.0 * m.r_tilde;
                let w = c.data.train.iter().map(|s| m.model.eval(&s.features).clamp(0.0, ceiling)).collect();
                (w, RatioAssignment::Trained)
            }
        };
        if let Some(bad) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::Numeric(format!("client {k} got weight {bad}")));
        }
        c.weights = weights;
        c.assignment = assignment;
    }
    Ok(())
}
