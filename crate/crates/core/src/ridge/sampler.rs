use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::conditions::{no_reweight_condition, no_reweight_corrected, reweight_condition, reweight_corrected};
use super::fixed::{bias_variance_fixed, excess_risk_mc, RidgeInstance};
use super::onehot::{OneHotProblem, OneHotSpectrum};
use crate::error::{Error, Result};
use crate::rng::{self, StreamRng, StreamTag};

const MAX_DRAWS: usize = 1_000_000;
const REL_TOL: f64 = 1e-10;

fn log_uniform(rng: &mut StreamRng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo.ln()..=hi.ln()).exp()
}

fn normal(rng: &mut StreamRng) -> f64 {
    Distribution::<f64>::sample(&StandardNormal, rng)
}

/// d uniform in 1..=4; spectra and lambda log-uniform in [1e-2, 10]; mu_i
/// uniform in 1..=50; theta*_i standard normal; sigma^2 log-uniform in
/// [1e-2, 10].
pub fn sample_problem(rng: &mut StreamRng) -> OneHotProblem {
    let d = rng.random_range(1..=4);
    OneHotProblem {
        mu: (0..d).map(|_| rng.random_range(1..=50)).collect(),
        lambda_tr: (0..d).map(|_| log_uniform(rng, 1e-2, 10.0)).collect(),
        lambda_te: (0..d).map(|_| log_uniform(rng, 1e-2, 10.0)).collect(),
        theta_star: (0..d).map(|_| normal(rng)).collect(),
        sigma2: log_uniform(rng, 1e-2, 10.0),
        lambda: log_uniform(rng, 1e-2, 10.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionForm {
    /// The conditions as stated.
    Stated,
    /// The exact per-coordinate conditions.
    Corrected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub check: String,
    pub form: ConditionForm,
    pub instances: usize,
    /// Total problems drawn, including those whose weight interval was empty.
    pub draws: usize,
    /// Instances where the claimed risk ordering fails.
    pub violations: usize,
    pub bias_violations: usize,
    pub variance_violations: usize,
    /// Largest relative excess of the side claimed smaller.
    pub max_rel_excess: f64,
    /// Instances whose weights exceed 1 (the stated no-reweighting form claims none).
    pub w_above_one: usize,
    /// Coordinates where the weight-interval and remark-interval feasibility
    /// tests disagree.
    pub form_disagreements: usize,
    pub first_violation: Option<(OneHotProblem, Vec<f64>)>,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

struct Draw {
    problem: OneHotProblem,
    w: Vec<f64>,
    draws: usize,
    form_disagreements: usize,
}

/// Draw problems until every coordinate's interval `[lo, hi]` (from
/// `interval`) is nonempty, then pick each weight uniformly inside it.
fn draw_feasible(
    seed: u64,
    index: u64,
    interval: impl Fn(&OneHotProblem) -> Option<Vec<(f64, f64)>>,
) -> Result<Draw> {
    let mut rng = rng::stream(seed, StreamTag::Instance, index);
    for draws in 1..=MAX_DRAWS {
        let problem = sample_problem(&mut rng);
        if let Some(iv) = interval(&problem) {
            let w = iv
                .iter()
                .map(|&(lo, hi)| if lo == hi { lo } else { rng.random_range(lo..=hi) })
                .collect();
            return Ok(Draw { problem, w, draws, form_disagreements: 0 });
        }
    }
    Err(Error::Numeric(format!("no feasible instance in {MAX_DRAWS} draws")))
}

fn spec_of(p: &OneHotProblem, w: &[f64]) -> OneHotSpectrum {
    OneHotSpectrum { mu: p.mu.clone(), w: w.to_vec() }
}

fn nonempty(iv: Vec<(f64, f64)>) -> Option<Vec<(f64, f64)>> {
    iv.iter().all(|(lo, hi)| lo <= hi && hi.is_finite()).then_some(iv)
}

fn sweep(
    check: &str,
    form: ConditionForm,
    num_instances: usize,
    draw: impl Fn(u64) -> Result<Draw> + Sync,
    weighted_should_win: bool,
) -> Result<SweepReport> {
    let draws: Vec<Draw> = (0..num_instances as u64).into_par_iter().map(&draw).collect::<Result<_>>()?;
    let mut rep = SweepReport {
        check: check.to_string(),
        form,
        instances: num_instances,
        draws: 0,
        violations: 0,
        bias_violations: 0,
        variance_violations: 0,
        max_rel_excess: f64::NEG_INFINITY,
        w_above_one: 0,
        form_disagreements: 0,
        first_violation: None,
    };
    for d in draws {
        rep.draws += d.draws;
        rep.form_disagreements += d.form_disagreements;
        if d.w.iter().any(|w| *w > 1.0 + 1e-12) {
            rep.w_above_one += 1;
        }
        let hat = d.problem.weighted(&d.w);
        let erm = d.problem.erm();
        let (small, large) = if weighted_should_win { (hat, erm) } else { (erm, hat) };
        let rel = (small.risk() - large.risk()) / large.risk();
        rep.max_rel_excess = rep.max_rel_excess.max(rel);
        if small.risk() > large.risk() * (1.0 + REL_TOL) {
            rep.violations += 1;
            if rep.first_violation.is_none() {
                rep.first_violation = Some((d.problem.clone(), d.w.clone()));
            }
        }
        if small.bias > large.bias * (1.0 + REL_TOL) {
            rep.bias_violations += 1;
        }
        if small.variance > large.variance * (1.0 + REL_TOL) {
            rep.variance_violations += 1;
        }
    }
    Ok(rep)
}

/// Sample instances whose weights satisfy the reweighting-helps condition and
/// count those where weighted ridge has larger risk than unweighted ridge.
pub fn reweight_sweep(num_instances: usize, seed: u64, form: ConditionForm) -> Result<SweepReport> {
    let draw = |i: u64| -> Result<Draw> {
        let mut d = draw_feasible(seed, i, |p| {
            let probe = spec_of(p, &vec![0.0; p.dim()]);
            let coords = match form {
                ConditionForm::Stated => reweight_condition(&probe, p.lambda, &p.lambda_tr, &p.lambda_te).ok()?.coords,
                ConditionForm::Corrected => reweight_corrected(&probe, p.lambda, &p.lambda_tr, &p.lambda_te).ok()?,
            };
            nonempty(coords.iter().map(|c| (c.lower.max(0.0), c.upper)).collect())
        })?;
        let v = reweight_condition(&spec_of(&d.problem, &d.w), d.problem.lambda, &d.problem.lambda_tr, &d.problem.lambda_te)?;
        d.form_disagreements = v.coords.iter().zip(&v.remark1).filter(|(c, r)| c.feasible() != **r).count();
        Ok(d)
    };
    sweep("reweight", form, num_instances, draw, true)
}

/// Sample instances whose weights satisfy the reweighting-hurts condition and
/// count those where unweighted ridge has larger risk.
pub fn no_reweight_sweep(num_instances: usize, seed: u64, form: ConditionForm) -> Result<SweepReport> {
    let draw = |i: u64| -> Result<Draw> {
        draw_feasible(seed, i, |p| {
            let probe = spec_of(p, &vec![0.0; p.dim()]);
            let coords = match form {
                ConditionForm::Stated => {
                    let v = no_reweight_condition(&probe, p.lambda, &p.lambda_tr, &p.lambda_te).ok()?;
                    if !v.precondition {
                        return None;
                    }
                    v.coords
                }
                ConditionForm::Corrected => no_reweight_corrected(&probe, p.lambda, &p.lambda_tr, &p.lambda_te).ok()?,
            };
            nonempty(coords.iter().map(|c| (c.lower.max(0.0), c.upper)).collect())
        })
    };
    sweep("no_reweight", form, num_instances, draw, false)
}

pub fn write_sweep_csv<W: Write>(mut out: W, reports: &[SweepReport]) -> Result<()> {
    let io = |e: std::io::Error| Error::Io(e.to_string());
    writeln!(
        out,
        "check,form,instances,draws,violations,bias_violations,variance_violations,max_rel_excess,w_above_one,form_disagreements"
    )
    .map_err(io)?;
    for r in reports {
        let form = match r.form {
            ConditionForm::Stated => "stated",
            ConditionForm::Corrected => "corrected",
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.check, form, r.instances, r.draws, r.violations, r.bias_violations,
            r.variance_violations, r.max_rel_excess, r.w_above_one, r.form_disagreements
        )
        .map_err(io)?;
    }
    Ok(())
}

/// Dense fixed-design instance: n = 50, d = 4, Gaussian design, weights
/// uniform in [0.2, 2], test second moment `A A^T / d + 0.1 I`.
pub fn random_fixed_instance(seed: u64, index: u64) -> RidgeInstance {
    let mut rng = rng::stream(seed, StreamTag::Instance, index);
    let (n, d) = (50, 4);
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| normal(&mut rng)).collect()).collect();
    let w = (0..n).map(|_| rng.random_range(0.2..2.0)).collect();
    let a: Vec<Vec<f64>> = (0..d).map(|_| (0..d).map(|_| normal(&mut rng)).collect()).collect();
    let sigma_te = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    let aa: f64 = (0..d).map(|k| a[i][k] * a[j][k]).sum::<f64>() / d as f64;
                    aa + if i == j { 0.1 } else { 0.0 }
                })
                .collect()
        })
        .collect();
    RidgeInstance {
        x,
        w,
        theta_star: (0..d).map(|_| normal(&mut rng)).collect(),
        sigma2: log_uniform(&mut rng, 0.1, 2.0),
        lambda: log_uniform(&mut rng, 1e-2, 10.0),
        sigma_te,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McIdentityReport {
    pub instances: usize,
    pub trials: usize,
    /// `(MC mean - (B + V)) / MC standard error` per instance.
    pub z_scores: Vec<f64>,
    pub within_3se: usize,
}

/// Compare Monte Carlo excess risk with the exact B + V on random dense
/// instances.
pub fn mc_identity_check(num_instances: usize, trials: usize, seed: u64) -> Result<McIdentityReport> {
    let z_scores: Vec<f64> = (0..num_instances as u64)
        .into_par_iter()
        .map(|i| {
            let inst = random_fixed_instance(seed, i);
            let exact = bias_variance_fixed(&inst)?.risk();
            let mc = excess_risk_mc(&inst, trials, rng::derive_seed(seed, StreamTag::Noise, i))?;
            Ok((mc.mean - exact) / mc.std_err)
        })
        .collect::<Result<_>>()?;
    let within_3se = z_scores.iter().filter(|z| z.abs() <= 3.0).count();
    Ok(McIdentityReport { instances: num_instances, trials, z_scores, within_3se })
}
