use std::path::Path;

use anyhow::Result;
use fedshift::fed::{consistency_sweep, ConsistencyReport};

use super::{write_json, write_text, Outcome};
use crate::config::{config_error, ExperimentConfig};

/// Excess risk against the exact target minimizer for every configured mode
/// and ratio source. Seeded by the first configured seed. Writes
/// `consistency.csv` (`mode,ratios,n,median,mean,std`) and `consistency.json`.
pub fn cmd_consistency(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let c = &cfg.consistency;
    if c.n_grid.is_empty() || c.replicates == 0 || c.modes.is_empty() || c.ratios.is_empty() {
        return Err(config_error("consistency needs a nonempty n_grid, modes, ratios and replicates >= 1"));
    }
    let seed = cfg.seeds[0];
    let k = c.family.num_clients();
    let mut reports: Vec<ConsistencyReport> = Vec::new();
    for &name in &c.modes {
        let mode = cfg.train_mode(name, k)?;
        for &ratios in &c.ratios {
            reports.push(consistency_sweep(&c.family, &mode, ratios, &c.n_grid, c.replicates, seed)?);
        }
    }

    let mut csv = String::from("mode,ratios,n,median,mean,std\n");
    for r in &reports {
        let ratios = serde_json::to_value(r.ratios)?.as_str().unwrap_or_default().to_string();
        for row in &r.rows {
            let std = row.std.map(|s| s.to_string()).unwrap_or_default();
            csv += &format!("{},{ratios},{},{},{},{std}\n", r.mode, row.n, row.median, row.mean);
        }
        println!(
            "{:<7} {:<7} medians {:?}  decreasing {}  slope {:.2}  limit {:.3e}",
            r.mode,
            ratios,
            r.rows.iter().map(|x| format!("{:.3e}", x.median)).collect::<Vec<_>>(),
            r.strictly_decreasing,
            r.log_log_slope,
            r.limit_excess
        );
    }
    write_text(&out.join("consistency.csv"), &csv)?;
    write_json(&out.join("consistency.json"), &reports)?;
    Ok(Outcome::Ok)
}
