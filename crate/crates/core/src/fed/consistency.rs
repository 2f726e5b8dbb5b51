use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand_distr::Normal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ratios::TrainMode;
use crate::error::{Error, Result};
use crate::ridge::weighted_ridge_solve;
use crate::rng::{self, StreamTag};

/// Covariate shift on a finite support: client k draws train inputs from
/// `train_pmfs[k]` and test inputs from `test_pmfs[k]`, with
/// `y = x^2 + N(0, noise_std^2)` everywhere. The model is an affine fit, so
/// the minimizer depends on which input distribution the risk is taken under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteShiftFamily {
    pub support: Vec<f64>,
    pub train_pmfs: Vec<Vec<f64>>,
    pub test_pmfs: Vec<Vec<f64>>,
    pub noise_std: f64,
}

/// Tiny ridge so that a sample concentrated on one support point still has a
/// unique solution; far below the statistical error at every n of interest.
const FIT_RIDGE: f64 = 1e-9;

impl DiscreteShiftFamily {
    /// Three clients whose train mass sits left, centre and right while
    /// their test mass is roughly mirrored.
    pub fn skewed_three_client() -> Self {
        Self {
            support: vec![-1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0],
            train_pmfs: vec![
                vec![0.30, 0.25, 0.20, 0.10, 0.08, 0.05, 0.02],
                vec![0.05, 0.10, 0.15, 0.40, 0.15, 0.10, 0.05],
                vec![0.02, 0.05, 0.08, 0.10, 0.20, 0.25, 0.30],
            ],
            test_pmfs: vec![
                vec![0.05, 0.05, 0.10, 0.10, 0.20, 0.20, 0.30],
                vec![0.30, 0.20, 0.10, 0.05, 0.10, 0.10, 0.15],
                vec![0.20, 0.20, 0.20, 0.10, 0.10, 0.10, 0.10],
            ],
            noise_std: 0.5,
        }
    }

    pub fn num_clients(&self) -> usize {
        self.train_pmfs.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.support.len();
        if m < 2 || self.train_pmfs.is_empty() || self.train_pmfs.len() != self.test_pmfs.len() {
            return Err(Error::Configuration(
                "need at least two support points and matching train/test pmfs".into(),
            ));
        }
        for p in self.train_pmfs.iter().chain(&self.test_pmfs) {
            let s: f64 = p.iter().sum();
            if p.len() != m || p.iter().any(|v| !(*v >= 0.0)) || (s - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidProportions(format!("bad pmf {p:?}")));
            }
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::Configuration("noise_std must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn regression_fn(x: f64) -> f64 {
        x * x
    }

    /// Input distribution whose risk `mode` targets.
    pub fn target_pmf(&self, mode: &TrainMode) -> Vec<f64> {
        match mode {
            TrainMode::Focused { target, .. } => self.test_pmfs[*target].clone(),
            _ => average(&self.test_pmfs),
        }
    }

    /// Minimizer of `sum_j mass[j] (a + b x_j - f(x_j))^2`.
    pub fn affine_projection(&self, mass: &[f64]) -> Result<[f64; 2]> {
        let x: Vec<Vec<f64>> = self.support.iter().map(|&s| vec![1.0, s]).collect();
        let y: Vec<f64> = self.support.iter().map(|&s| Self::regression_fn(s)).collect();
        let th = weighted_ridge_solve(&x, mass, &y, 0.0)?;
        Ok([th[0], th[1]])
    }

    /// Exact excess risk of `theta` under the input distribution `pmf`.
    pub fn excess_risk(&self, theta: [f64; 2], pmf: &[f64]) -> Result<f64> {
        let star = self.affine_projection(pmf)?;
        Ok(self
            .support
            .iter()
            .zip(pmf)
            .map(|(&x, &p)| {
                let d = (theta[0] - star[0]) + (theta[1] - star[1]) * x;
                p * d * d
            })
            .sum())
    }

    /// Population mass of the weighted objective `mode` minimizes, with
    /// exact ratios. Its projection is where the estimator converges.
    pub fn limit_mass(&self, mode: &TrainMode) -> Vec<f64> {
        match mode {
            TrainMode::Fedavg => sum(&self.train_pmfs),
            // Reweighting every client onto test distributions.
            TrainMode::Ftw | TrainMode::Fitw => sum(&self.test_pmfs),
            TrainMode::Focused { target, lambdas } => {
                let total: f64 = lambdas.iter().sum();
                self.test_pmfs[*target].iter().map(|p| total * p).collect()
            }
        }
    }
}

fn sum(pmfs: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; pmfs[0].len()];
    for p in pmfs {
        out.iter_mut().zip(p).for_each(|(o, v)| *o += v);
    }
    out
}

fn average(pmfs: &[Vec<f64>]) -> Vec<f64> {
    let k = pmfs.len() as f64;
    sum(pmfs).into_iter().map(|v| v / k).collect()
}

/// How the weights in the sweep are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsistencyRatios {
    /// True pmf ratios.
    Oracle,
    /// Ratios of empirical frequencies: each client's train counts and the
    /// unlabelled test draws it is allowed to see.
    Plugin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyRow {
    /// Train (and test-pool) samples per client.
    pub n: usize,
    pub median: f64,
    pub mean: f64,
    /// Sample standard deviation; `None` for a single seed.
    pub std: Option<f64>,
    pub per_seed: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub mode: String,
    pub ratios: ConsistencyRatios,
    pub rows: Vec<ConsistencyRow>,
    /// Medians strictly decrease along the grid.
    pub strictly_decreasing: bool,
    /// Least-squares slope of ln(median) on ln(n).
    pub log_log_slope: f64,
    /// Excess risk of the mode's population minimizer: zero for a
    /// consistent mode, a positive floor otherwise.
    pub limit_excess: f64,
}

fn draw(pmf: &[f64], n: usize, rng: &mut rng::StreamRng) -> Result<Vec<usize>> {
    let dist = WeightedIndex::new(pmf).map_err(|e| Error::InvalidProportions(e.to_string()))?;
    Ok((0..n).map(|_| dist.sample(rng)).collect())
}

fn frequencies(idx: &[usize], m: usize) -> Vec<f64> {
    let mut f = vec![0.0; m];
    idx.iter().for_each(|&j| f[j] += 1.0);
    f.iter_mut().for_each(|v| *v /= idx.len() as f64);
    f
}

/// Fit one federated weighted least-squares estimate with `n` train samples
/// per client and return its exact excess risk.
pub fn consistency_trial(
    family: &DiscreteShiftFamily,
    mode: &TrainMode,
    ratios: ConsistencyRatios,
    n: usize,
    seed: u64,
) -> Result<f64> {
    family.validate()?;
    mode.validate(family.num_clients())?;
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let k_total = family.num_clients();
    let m = family.support.len();
    let noise = Normal::new(0.0, family.noise_std).map_err(|e| Error::Configuration(e.to_string()))?;

    let mut train_idx = Vec::with_capacity(k_total);
    let mut ys = Vec::with_capacity(k_total);
    let mut test_freq = Vec::with_capacity(k_total);
    for k in 0..k_total {
        let mut r = rng::stream(seed, StreamTag::Client, k as u64);
        let idx = draw(&family.train_pmfs[k], n, &mut r)?;
        ys.push(
            idx.iter()
                .map(|&j| DiscreteShiftFamily::regression_fn(family.support[j]) + noise.sample(&mut r))
                .collect::<Vec<_>>(),
        );
        train_idx.push(idx);
        if ratios == ConsistencyRatios::Plugin {
            let pool = draw(&family.test_pmfs[k], n, &mut rng::stream(seed, StreamTag::ClassPool, k as u64))?;
            test_freq.push(frequencies(&pool, m));
        }
    }
    let (p_tr, p_te): (Vec<Vec<f64>>, &[Vec<f64>]) = match ratios {
        ConsistencyRatios::Oracle => (family.train_pmfs.clone(), &family.test_pmfs),
        ConsistencyRatios::Plugin => (train_idx.iter().map(|i| frequencies(i, m)).collect(), &test_freq),
    };

    let mut x = Vec::with_capacity(k_total * n);
    let mut w = Vec::with_capacity(k_total * n);
    let mut y = Vec::with_capacity(k_total * n);
    for k in 0..k_total {
        // Any support point drawn by client k has positive (empirical) mass.
        let ratio = |j: usize| -> f64 {
            let q = p_tr[k][j];
            match mode {
                TrainMode::Fedavg => 1.0,
                TrainMode::Fitw => p_te[k][j] / q,
                TrainMode::Ftw => p_te.iter().map(|p| p[j]).sum::<f64>() / q,
                TrainMode::Focused { target, lambdas } => lambdas[k] * p_te[*target][j] / q,
            }
        };
        for (&j, &yi) in train_idx[k].iter().zip(&ys[k]) {
            x.push(vec![1.0, family.support[j]]);
            w.push(ratio(j) / n as f64);
            y.push(yi);
        }
    }
    let th = weighted_ridge_solve(&x, &w, &y, FIT_RIDGE)?;
    family.excess_risk([th[0], th[1]], &family.target_pmf(mode))
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Excess risk against the exact target-risk minimizer for every `n` in
/// `n_grid` and `seeds` independent replicates.
pub fn consistency_sweep(
    family: &DiscreteShiftFamily,
    mode: &TrainMode,
    ratios: ConsistencyRatios,
    n_grid: &[usize],
    seeds: usize,
    seed: u64,
) -> Result<ConsistencyReport> {
    if n_grid.is_empty() || seeds == 0 {
        return Err(Error::InvalidArgument("need a nonempty grid and at least one seed".into()));
    }
    let rows = n_grid
        .iter()
        .map(|&n| {
            let per_seed: Vec<f64> = (0..seeds)
                .into_par_iter()
                .map(|s| {
                    let run = rng::derive_seed(rng::derive_seed(seed, StreamTag::Instance, s as u64), StreamTag::Noise, n as u64);
                    consistency_trial(family, mode, ratios, n, run)
                })
                .collect::<Result<_>>()?;
            let mean = per_seed.iter().sum::<f64>() / seeds as f64;
            let std = (seeds > 1).then(|| {
                (per_seed.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (seeds - 1) as f64).sqrt()
            });
            Ok(ConsistencyRow { n, median: median(&per_seed), mean, std, per_seed })
        })
        .collect::<Result<Vec<_>>>()?;

    let strictly_decreasing = rows.windows(2).all(|w| w[1].median < w[0].median);
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.median > 0.0)
        .map(|r| ((r.n as f64).ln(), r.median.ln()))
        .collect();
    let log_log_slope = if pts.len() >= 2 {
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        if sxx > 0.0 { sxy / sxx } else { f64::NAN }
    } else {
        f64::NAN
    };
    let limit = family.affine_projection(&family.limit_mass(mode))?;
    Ok(ConsistencyReport {
        mode: mode.name().into(),
        ratios,
        rows,
        strictly_decreasing,
        log_log_slope,
        limit_excess: family.excess_risk(limit, &family.target_pmf(mode))?,
    })
}
