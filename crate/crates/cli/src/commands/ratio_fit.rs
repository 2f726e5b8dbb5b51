use std::path::Path;

use anyhow::Result;
use fedshift::fed::{broadcast_shuffled_pool, fit_client_ratios, DataFlowAudit, RatioPipeline, TrainMode};
use fedshift::ratio::{empirical_bd_risk, supremum_sweep, write_sweep_csv, ConstantRatio};
use fedshift::rng::{self, StreamTag};
use rayon::prelude::*;

use super::{csv_string, write_json, write_text, Outcome};
use crate::config::{config_error, ExperimentConfig};

struct HeldOutRow {
    client: usize,
    r_tilde: f64,
    c: f64,
    best_epoch: usize,
    bd_risk: f64,
    /// Same risk for the constant ratio 1, for scale.
    bd_risk_constant_one: f64,
}

/// Fit per-client ratio models and sweep the k-means supremum estimate.
/// Per seed: `ratio_client_<k>.json`, `supremum_sweep_client_<k>.csv` and
/// `bd_risk.csv`, evaluated on an independent draw of the same scenario.
pub fn cmd_ratio_fit(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let RatioPipeline::Trained { variant, .. } = &cfg.ratios else {
        return Err(config_error("ratio-fit needs a trained ratio source; the oracle has nothing to fit"));
    };
    let variant = *variant;
    let rf = &cfg.ratio_fit;

    cfg.seeds.par_iter().try_for_each(|&seed| -> Result<()> {
        let scenario = cfg.scenario(seed)?;
        let k_total = scenario.num_clients();
        let mode = cfg.train_mode(rf.mode, k_total)?;
        if !matches!(mode, TrainMode::Ftw | TrainMode::Fitw) {
            return Err(config_error(format!("ratio-fit supports ftw and fitw, not {}", mode.name())));
        }
        let splits = scenario.generate()?;
        let models = fit_client_ratios(&splits, &mode, &cfg.ratios, &DataFlowAudit::new(), seed)?;
        let dir = out.join(format!("seed_{seed}"));

        let shared = match mode {
            TrainMode::Ftw => Some(broadcast_shuffled_pool(&splits, seed)?),
            _ => None,
        };
        for (s, m) in splits.iter().zip(&models) {
            let k = s.client_id;
            write_json(&dir.join(format!("ratio_client_{k}.json")), m)?;
            let (pooled, k_eff) = match &shared {
                Some(p) => (p.as_slice(), k_total),
                None => (s.test_pool.as_slice(), 1),
            };
            let sweep_seed = rng::derive_seed(seed, StreamTag::KMeans, k as u64);
            let rows = supremum_sweep(&s.train_features(), pooled, k_eff, &rf.sweep_m, rf.kmeans_iters, sweep_seed)?;
            write_text(
                &dir.join(format!("supremum_sweep_client_{k}.csv")),
                &csv_string(|b| write_sweep_csv(b, &rows))?,
            )?;
        }

        let held = fedshift::synthdata::ShiftScenario { seed: rng::derive_seed(seed, StreamTag::Instance, 1), ..scenario }
            .generate()?;
        let held_pool: Vec<Vec<f64>> = held.iter().flat_map(|s| s.test_pool.clone()).collect();
        let mut table = String::from("client,r_tilde,c,best_epoch,bd_risk,bd_risk_constant_one\n");
        let mut rows = Vec::new();
        for (h, m) in held.iter().zip(&models) {
            let pooled = if shared.is_some() { held_pool.as_slice() } else { h.test_pool.as_slice() };
            let train = h.train_features();
            let row = HeldOutRow {
                client: h.client_id,
                r_tilde: m.r_tilde,
                c: m.c,
                best_epoch: m.best_epoch,
                bd_risk: empirical_bd_risk(variant, &m.model, m.c, m.num_clients, &train, pooled)?,
                bd_risk_constant_one: empirical_bd_risk(variant, &ConstantRatio(1.0), m.c, m.num_clients, &train, pooled)?,
            };
            table += &format!(
                "{},{},{},{},{},{}\n",
                row.client, row.r_tilde, row.c, row.best_epoch, row.bd_risk, row.bd_risk_constant_one
            );
            rows.push(row);
        }
        write_text(&dir.join("bd_risk.csv"), &table)?;
        for r in &rows {
            println!(
                "seed {seed} client {}: r~ {:.3}, held-out BD risk {:.4} (constant 1: {:.4})",
                r.client, r.r_tilde, r.bd_risk, r.bd_risk_constant_one
            );
        }
        Ok(())
    })?;
    Ok(Outcome::Ok)
}
