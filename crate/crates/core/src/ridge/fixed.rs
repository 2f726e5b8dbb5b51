use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, StreamTag};

/// Fixed-design weighted ridge problem. Matrices are stored row-major as
/// nested vectors so instances serialise to readable JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeInstance {
    /// n × d design.
    pub x: Vec<Vec<f64>>,
    /// One nonnegative weight per row.
    pub w: Vec<f64>,
    pub theta_star: Vec<f64>,
    pub sigma2: f64,
    pub lambda: f64,
    /// d × d test second-moment matrix.
    pub sigma_te: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasVariance {
    pub bias: f64,
    pub variance: f64,
}

impl BiasVariance {
    pub fn risk(&self) -> f64 {
        self.bias + self.variance
    }
}

pub(crate) fn to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rows.len();
    let d = rows.first().map_or(0, |r| r.len());
    DMatrix::from_fn(n, d, |i, j| rows[i][j])
}

impl RidgeInstance {
    pub fn dim(&self) -> usize {
        self.theta_star.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.x.len() != self.w.len() {
            return bad("design rows and weights differ in length");
        }
        if self.x.iter().any(|r| r.len() != d) {
            return bad("design columns must match theta_star");
        }
        if self.sigma_te.len() != d || self.sigma_te.iter().any(|r| r.len() != d) {
            return bad("sigma_te must be d × d");
        }
        if self.w.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return bad("weights must be finite and nonnegative");
        }
        if !(self.sigma2 >= 0.0) || !(self.lambda >= 0.0) {
            return bad("sigma2 and lambda must be nonnegative");
        }
        Ok(())
    }

    /// Noise-free labels X θ*.
    pub fn mean_labels(&self) -> Vec<f64> {
        self.x
            .iter()
            .map(|r| r.iter().zip(&self.theta_star).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn factor(&self) -> Result<(DMatrix<f64>, Cholesky<f64, Dyn>)> {
        self.validate()?;
        let x = to_matrix(&self.x);
        let sw = gram(&x, &self.w, self.lambda);
        let chol = Cholesky::new(sw).ok_or_else(|| {
            Error::Singular("X^T W X + lambda I is not positive definite".into())
        })?;
        Ok((x, chol))
    }
}

/// `X^T diag(w) X + lambda I`.
fn gram(x: &DMatrix<f64>, w: &[f64], lambda: f64) -> DMatrix<f64> {
    let d = x.ncols();
    let mut xw = x.clone();
    for (i, mut row) in xw.row_iter_mut().enumerate() {
        row *= w[i];
    }
    x.transpose() * xw + DMatrix::identity(d, d) * lambda
}

/// Minimiser of `sum_i w_i (θ·x_i - y_i)^2 + lambda |θ|^2`.
pub fn weighted_ridge_solve(x: &[Vec<f64>], w: &[f64], y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if x.len() != w.len() || x.len() != y.len() {
        return Err(Error::InvalidArgument("x, w and y lengths differ".into()));
    }
    let xm = to_matrix(x);
    let chol = Cholesky::new(gram(&xm, w, lambda))
        .ok_or_else(|| Error::Singular("X^T W X + lambda I is not positive definite".into()))?;
    let wy = DVector::from_iterator(y.len(), y.iter().zip(w).map(|(a, b)| a * b));
    Ok(chol.solve(&(xm.transpose() * wy)).iter().copied().collect())
}

/// Exact bias and variance of the weighted ridge estimate on the test
/// second moment.
pub fn bias_variance_fixed(inst: &RidgeInstance) -> Result<BiasVariance> {
    let (x, chol) = inst.factor()?;
    let te = to_matrix(&inst.sigma_te);
    let th = DVector::from_column_slice(&inst.theta_star);
    let a_th = chol.solve(&th);
    let bias = inst.lambda * inst.lambda * (a_th.transpose() * &te * &a_th)[(0, 0)];

    let w2: Vec<f64> = inst.w.iter().map(|w| w * w).collect();
    let middle = gram(&x, &w2, 0.0);
    let a = chol.inverse();
    let variance = inst.sigma2 * (&a * middle * &a * te).trace();
    Ok(BiasVariance { bias, variance })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub trials: usize,
}

/// Monte Carlo excess test risk `(θ̂-θ*)^T Σ_te (θ̂-θ*)` of the weighted ridge
/// estimate, resampling only Gaussian label noise.
pub fn excess_risk_mc(inst: &RidgeInstance, num_trials: usize, seed: u64) -> Result<McEstimate> {
    if num_trials == 0 {
        return Err(Error::InvalidArgument("num_trials must be at least 1".into()));
    }
    let (x, chol) = inst.factor()?;
    let n = x.nrows();
    let te = to_matrix(&inst.sigma_te);
    let th = DVector::from_column_slice(&inst.theta_star);
    let mut xtw = x.transpose();
    for (j, mut col) in xtw.column_iter_mut().enumerate() {
        col *= inst.w[j];
    }
    // θ̂ = M y with M = (X^T W X + λI)^{-1} X^T W.
    let m = chol.solve(&xtw);
    let y0 = &x * &th;
    let base = &m * &y0 - &th;
    let sd = inst.sigma2.sqrt();
    let mut rng = rng::stream(seed, StreamTag::Noise, 0);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut eps = DVector::zeros(n);
    for _ in 0..num_trials {
        for e in eps.iter_mut() {
            *e = sd * Distribution::<f64>::sample(&StandardNormal, &mut rng);
        }
        let diff = &base + &m * &eps;
        let r = (diff.transpose() * &te * &diff)[(0, 0)];
        sum += r;
        sum_sq += r * r;
    }
    let t = num_trials as f64;
    let mean = sum / t;
    let var = if num_trials > 1 { ((sum_sq - t * mean * mean) / (t - 1.0)).max(0.0) } else { 0.0 };
    Ok(McEstimate { mean, std_err: (var / t).sqrt(), trials: num_trials })
}
