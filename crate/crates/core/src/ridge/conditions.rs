use serde::{Deserialize, Serialize};

use super::onehot::OneHotSpectrum;
use crate::error::{Error, Result};

/// Interval check for one coordinate's weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoordVerdict {
    pub lower: f64,
    pub upper: f64,
    pub w: f64,
    pub holds: bool,
}

impl CoordVerdict {
    fn new(lower: f64, upper: f64, w: f64) -> Self {
        Self { lower, upper, w, holds: lower <= w && w <= upper }
    }

    pub fn feasible(&self) -> bool {
        self.lower.max(0.0) <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReweightVerdict {
    pub coords: Vec<CoordVerdict>,
    /// `s_i <= (1 + sqrt(1 + 4 xi_i)) / 2` per coordinate.
    pub remark1: Vec<bool>,
    pub holds: bool,
    /// Nonempty weight interval agrees with the closed-form interval test on
    /// every coordinate.
    pub forms_agree: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoReweightVerdict {
    pub coords: Vec<CoordVerdict>,
    /// `s_i >= max(xi_i, 1 - xi_i)` on every coordinate.
    pub precondition: bool,
    pub holds: bool,
}

fn check_lengths(spec: &OneHotSpectrum, a: &[f64], b: &[f64]) -> Result<()> {
    let d = spec.mu.len();
    if a.len() != d || b.len() != d {
        return Err(Error::InvalidArgument("spectra must match the one-hot dimension".into()));
    }
    if a.iter().chain(b).any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidArgument("eigenvalues must be positive".into()));
    }
    Ok(())
}

fn check_mu(spec: &OneHotSpectrum) -> Result<()> {
    if spec.mu.contains(&0) {
        return Err(Error::InvalidArgument("every coordinate needs mu_i > 0".into()));
    }
    Ok(())
}

fn ratios(lambda_tr: &[f64], lambda_te: &[f64]) -> Vec<f64> {
    lambda_te.iter().zip(lambda_tr).map(|(a, b)| (a / b).sqrt()).collect()
}

/// `s_i - 1 <= w_i <= xi_i / s_i` with `s_i = sqrt(l'_i / l_i)`, the stated
/// sufficient condition for reweighting to beat unweighted ridge.
pub fn reweight_condition(
    spec: &OneHotSpectrum,
    lambda: f64,
    lambda_tr: &[f64],
    lambda_te: &[f64],
) -> Result<ReweightVerdict> {
    check_lengths(spec, lambda_tr, lambda_te)?;
    let xi = spec.xi(lambda);
    let s = ratios(lambda_tr, lambda_te);
    let coords: Vec<CoordVerdict> = (0..xi.len())
        .map(|i| CoordVerdict::new(s[i] - 1.0, xi[i] / s[i], spec.w[i]))
        .collect();
    let remark1: Vec<bool> = (0..xi.len())
        .map(|i| s[i] <= (1.0 + (1.0 + 4.0 * xi[i]).sqrt()) / 2.0)
        .collect();
    let forms_agree = coords.iter().zip(&remark1).all(|(c, r)| c.feasible() == *r);
    Ok(ReweightVerdict {
        holds: coords.iter().all(|c| c.holds),
        coords,
        remark1,
        forms_agree,
    })
}

/// Exact per-coordinate bias condition `w_i >= s_i + (lambda/mu_i)(s_i - 1)`
/// combined with the stated variance bound `w_i <= xi_i / s_i`.
pub fn reweight_corrected(
    spec: &OneHotSpectrum,
    lambda: f64,
    lambda_tr: &[f64],
    lambda_te: &[f64],
) -> Result<Vec<CoordVerdict>> {
    check_lengths(spec, lambda_tr, lambda_te)?;
    check_mu(spec)?;
    let xi = spec.xi(lambda);
    let s = ratios(lambda_tr, lambda_te);
    Ok((0..xi.len())
        .map(|i| {
            let mu = spec.mu[i] as f64;
            CoordVerdict::new(s[i] + lambda / mu * (s[i] - 1.0), xi[i] / s[i], spec.w[i])
        })
        .collect())
}

/// Stated condition under which unweighted ridge is no worse:
/// `s_i >= max(xi_i, 1 - xi_i)` and
/// `w_i <= min(1 / ((s_i - 1)/xi_i + 1), s_i + (lambda/mu_i) s_i - lambda/mu_i)`.
pub fn no_reweight_condition(
    spec: &OneHotSpectrum,
    lambda: f64,
    lambda_tr: &[f64],
    lambda_te: &[f64],
) -> Result<NoReweightVerdict> {
    check_lengths(spec, lambda_tr, lambda_te)?;
    check_mu(spec)?;
    let xi = spec.xi(lambda);
    let s = ratios(lambda_tr, lambda_te);
    let precondition = (0..xi.len()).all(|i| s[i] >= xi[i].max(1.0 - xi[i]));
    let coords: Vec<CoordVerdict> = (0..xi.len())
        .map(|i| {
            let mu = spec.mu[i] as f64;
            let var_ub = 1.0 / ((s[i] - 1.0) / xi[i] + 1.0);
            let var_ub = if var_ub.is_finite() && var_ub >= 0.0 { var_ub } else { f64::INFINITY };
            let bias_ub = s[i] + lambda / mu * s[i] - lambda / mu;
            CoordVerdict::new(f64::NEG_INFINITY, var_ub.min(bias_ub), spec.w[i])
        })
        .collect();
    Ok(NoReweightVerdict {
        holds: precondition && coords.iter().all(|c| c.holds),
        coords,
        precondition,
    })
}

/// Exact per-coordinate conditions for unweighted ridge to be no worse:
/// `xi_i / (s_i - 1 + xi_i) <= w_i <= s_i + (lambda/mu_i)(s_i - 1)`, requiring
/// `s_i - 1 + xi_i > 0`.
pub fn no_reweight_corrected(
    spec: &OneHotSpectrum,
    lambda: f64,
    lambda_tr: &[f64],
    lambda_te: &[f64],
) -> Result<Vec<CoordVerdict>> {
    check_lengths(spec, lambda_tr, lambda_te)?;
    check_mu(spec)?;
    let xi = spec.xi(lambda);
    let s = ratios(lambda_tr, lambda_te);
    Ok((0..xi.len())
        .map(|i| {
            let mu = spec.mu[i] as f64;
            let den = s[i] - 1.0 + xi[i];
            let lower = if den > 0.0 { xi[i] / den } else { f64::INFINITY };
            CoordVerdict::new(lower, s[i] + lambda / mu * (s[i] - 1.0), spec.w[i])
        })
        .collect())
}
