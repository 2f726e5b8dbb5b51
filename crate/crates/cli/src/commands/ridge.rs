use std::path::Path;

use anyhow::Result;
use fedshift::ridge::{mc_identity_check, no_reweight_sweep, reweight_sweep, write_sweep_csv, ConditionForm, McIdentityReport, SweepReport};
use serde::Serialize;

use super::{csv_string, write_json, write_text, Outcome};
use crate::config::config_error;

#[derive(Debug, Clone)]
pub struct RidgeArgs {
    pub instances: usize,
    pub mc_instances: usize,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Serialize)]
struct RidgeReport {
    seed: u64,
    sweeps: Vec<SweepReport>,
    mc_identity: McIdentityReport,
    /// Fraction of Monte Carlo z-scores within ±3.
    mc_identity_within_3se: f64,
    passed: bool,
}

/// Exact soundness sweeps for both reweighting conditions, in their stated
/// and corrected forms, plus the Monte Carlo bias-variance identity.
/// Writes `ridge_report.json` and `ridge_sweeps.csv`.
pub fn cmd_ridge_verify(args: &RidgeArgs, out: &Path) -> Result<Outcome> {
    if args.instances == 0 || args.mc_instances == 0 || args.trials < 2 {
        return Err(config_error("instances must be at least 1 and trials at least 2"));
    }
    let mut sweeps = Vec::new();
    for form in [ConditionForm::Stated, ConditionForm::Corrected] {
        sweeps.push(reweight_sweep(args.instances, args.seed, form)?);
        sweeps.push(no_reweight_sweep(args.instances, args.seed, form)?);
    }
    let mc_identity = mc_identity_check(args.mc_instances, args.trials, args.seed)?;
    let frac = mc_identity.within_3se as f64 / mc_identity.instances as f64;
    let passed = sweeps.iter().all(SweepReport::passed) && frac >= 0.95;

    for s in &sweeps {
        println!(
            "{:<11} {:<9} {} instances, {} violations{}",
            s.check,
            format!("{:?}", s.form).to_lowercase(),
            s.instances,
            s.violations,
            if s.passed() { "" } else { "  FAIL" }
        );
    }
    println!(
        "mc          {}/{} z-scores within 3 SE{}",
        mc_identity.within_3se,
        mc_identity.instances,
        if frac >= 0.95 { "" } else { "  FAIL" }
    );

    write_text(&out.join("ridge_sweeps.csv"), &csv_string(|b| write_sweep_csv(b, &sweeps))?)?;
    write_json(
        &out.join("ridge_report.json"),
        &RidgeReport { seed: args.seed, sweeps, mc_identity, mc_identity_within_3se: frac, passed },
    )?;
    Ok(if passed { Outcome::Ok } else { Outcome::CheckFailed })
}
