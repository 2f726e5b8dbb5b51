use std::path::Path;

use anyhow::Result;
use fedshift::ridge::{eigen_ratio_report, write_eigen_csv};

use super::{csv_string, write_text, Outcome};
use crate::config::ExperimentConfig;

/// Paired train/test second-moment eigenvalues for each client (train split
/// against its test pool) and for all clients together, for the first seed.
/// Writes `eigen_client_<k>.csv` and `eigen_all.csv`.
pub fn cmd_eigen_report(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let seed = cfg.seeds[0];
    let splits = cfg.scenario(seed)?.generate()?;
    let lambda = cfg.eigen.lambda;
    for s in &splits {
        let rows = eigen_ratio_report(&s.train_features(), &s.test_pool, lambda)?;
        let outside = rows.iter().filter(|r| !r.within_bound).count();
        println!("client {}: {} eigenvalues, {outside} outside the bound", s.client_id, rows.len());
        write_text(
            &out.join(format!("eigen_client_{}.csv", s.client_id)),
            &csv_string(|b| write_eigen_csv(b, &rows))?,
        )?;
    }
    let train: Vec<Vec<f64>> = splits.iter().flat_map(|s| s.train_features()).collect();
    let test: Vec<Vec<f64>> = splits.iter().flat_map(|s| s.test_pool.clone()).collect();
    let rows = eigen_ratio_report(&train, &test, lambda)?;
    write_text(&out.join("eigen_all.csv"), &csv_string(|b| write_eigen_csv(b, &rows))?)?;
    Ok(Outcome::Ok)
}
