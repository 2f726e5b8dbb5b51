use std::path::Path;

use anyhow::Result;
use fedshift::fed::{run_training, write_round_log_csv, TrainingConfig};
use rayon::prelude::*;

use super::{csv_string, write_json, write_text, Outcome};
use crate::config::ExperimentConfig;
use crate::summary::{ModeAggregate, ResultSummary, RunSummary};

/// Every configured mode for every seed. Layout:
/// `out/seed_<s>/<mode>/{summary.json,rounds.csv[,ratio_models.json]}` plus
/// `out/summary.{json,csv}` aggregated over seeds.
pub fn cmd_train(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let spec = cfg.predictor_section()?.clone();
    let training = TrainingConfig { server: cfg.server.clone(), ratios: cfg.ratios.clone(), threads: None };

    let runs: Vec<Vec<RunSummary>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| -> Result<Vec<RunSummary>> {
            let scenario = cfg.scenario(seed)?;
            let k = scenario.num_clients();
            cfg.modes
                .iter()
                .map(|&name| {
                    let mode = cfg.train_mode(name, k)?;
                    let outcome = run_training(&scenario, &mode, &spec, &training, seed)?;
                    let dir = out.join(format!("seed_{seed}")).join(mode.name());
                    let run = RunSummary { seed, summary: outcome.summary };
                    write_json(&dir.join("summary.json"), &run)?;
                    write_text(
                        &dir.join("rounds.csv"),
                        &csv_string(|b| write_round_log_csv(b, &mode, k, &outcome.logs))?,
                    )?;
                    if !outcome.ratio_models.is_empty() {
                        write_json(&dir.join("ratio_models.json"), &outcome.ratio_models)?;
                    }
                    Ok(run)
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let modes = (0..cfg.modes.len())
        .map(|m| {
            let per_seed: Vec<RunSummary> = runs.iter().map(|r| r[m].clone()).collect();
            ModeAggregate::new(per_seed[0].summary.mode.clone(), per_seed)
        })
        .collect();
    let summary = ResultSummary { experiment: cfg.name.clone(), seeds: cfg.seeds.clone(), modes };
    write_json(&out.join("summary.json"), &summary)?;
    write_text(&out.join("summary.csv"), &summary.to_csv())?;
    for m in &summary.modes {
        let std = m.average.std.map(|s| format!(" ± {s:.4}")).unwrap_or_default();
        println!("{:<8} average {:.4}{std}  worst {:.4}  best {:.4}", m.mode, m.average.mean, m.worst.mean, m.best.mean);
    }
    Ok(Outcome::Ok)
}
