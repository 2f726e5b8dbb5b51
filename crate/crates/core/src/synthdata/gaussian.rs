use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, StreamTag};

/// Exact ratio N(mean_te, variance) / N(mean_tr, variance).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianRatio {
    pub mean_tr: f64,
    pub mean_te: f64,
    pub variance: f64,
}

impl GaussianRatio {
    pub fn eval(&self, x: f64) -> f64 {
        let (a, b, v) = (self.mean_tr, self.mean_te, self.variance);
        ((b - a) * x / v + (a * a - b * b) / (2.0 * v)).exp()
    }

    /// Train density at `x`.
    pub fn train_pdf(&self, x: f64) -> f64 {
        let z = x - self.mean_tr;
        (-z * z / (2.0 * self.variance)).exp() / (2.0 * std::f64::consts::PI * self.variance).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianShiftPair {
    pub train: Vec<Vec<f64>>,
    pub test: Vec<Vec<f64>>,
    pub ratio: GaussianRatio,
}

/// One-dimensional covariate-shift fixture with a closed-form ratio.
pub fn gaussian_shift_pair(
    mean_tr: f64,
    mean_te: f64,
    variance: f64,
    n_tr: usize,
    n_te: usize,
    seed: u64,
) -> Result<GaussianShiftPair> {
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::InvalidArgument(format!("variance must be positive, got {variance}")));
    }
    let sd = variance.sqrt();
    let draw = |mean: f64, n: usize, index: u64| -> Result<Vec<Vec<f64>>> {
        let normal = Normal::new(mean, sd).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut rng = rng::stream(seed, StreamTag::Instance, index);
        Ok((0..n).map(|_| vec![normal.sample(&mut rng)]).collect())
    };
    Ok(GaussianShiftPair {
        train: draw(mean_tr, n_tr, 0)?,
        test: draw(mean_te, n_te, 1)?,
        ratio: GaussianRatio { mean_tr, mean_te, variance },
    })
}
