use rand::Rng;
use serde::{Deserialize, Serialize};

use super::partition::nearest;
use crate::error::{Error, Result};
use crate::rng::{self, StreamTag};
use crate::synthdata::GaussianRatio;

/// Lower offset keeping every ratio strictly positive.
pub const RATIO_EPS: f64 = 1e-6;

/// Anything that maps a feature vector to a nonnegative weight.
pub trait RatioFunction {
    fn ratio(&self, x: &[f64]) -> f64;
}

impl RatioFunction for GaussianRatio {
    fn ratio(&self, x: &[f64]) -> f64 {
        self.eval(x[0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantRatio(pub f64);

impl RatioFunction for ConstantRatio {
    fn ratio(&self, _x: &[f64]) -> f64 {
        self.0
    }
}

impl<F: Fn(&[f64]) -> f64> RatioFunction for F {
    fn ratio(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RatioKind {
    /// One free value per nearest-centroid cell.
    ClassTable { centroids: Vec<Vec<f64>> },
    LinearSoftplus { dim: usize },
    /// One tanh hidden layer.
    MlpSoftplus { dim: usize, hidden: usize },
}

impl RatioKind {
    pub fn num_params(&self) -> usize {
        match self {
            RatioKind::ClassTable { centroids } => centroids.len(),
            RatioKind::LinearSoftplus { dim } => dim + 1,
            RatioKind::MlpSoftplus { dim, hidden } => hidden * dim + 2 * hidden + 1,
        }
    }
}

/// `r(x) = min(eps + softplus(u(x)), r_max)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioModel {
    pub kind: RatioKind,
    pub params: Vec<f64>,
    pub r_max: f64,
}

fn softplus(u: f64) -> f64 {
    if u > 30.0 {
        u
    } else {
        u.exp().ln_1p()
    }
}

fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// softplus(INIT_BIAS) = 1.
fn init_bias() -> f64 {
    (std::f64::consts::E - 1.0).ln()
}

impl RatioModel {
    /// Parameters start so that r is close to 1 everywhere.
    pub fn new(kind: RatioKind, r_max: f64, seed: u64) -> Result<Self> {
        if !(r_max > RATIO_EPS) || r_max.is_nan() {
            return Err(Error::InvalidArgument(format!("r_max must exceed {RATIO_EPS}, got {r_max}")));
        }
        let mut params = vec![0.0; kind.num_params()];
        match &kind {
            RatioKind::ClassTable { centroids } => {
                if centroids.is_empty() {
                    return Err(Error::InvalidArgument("class table needs at least one cell".into()));
                }
                params.fill(init_bias());
            }
            RatioKind::LinearSoftplus { dim } => params[*dim] = init_bias(),
            RatioKind::MlpSoftplus { dim, hidden } => {
                let mut rng = rng::stream(seed, StreamTag::Init, 0);
                let bound = 1.0 / (*dim as f64).sqrt();
                for p in params.iter_mut().take(hidden * dim) {
                    *p = rng.random_range(-bound..=bound);
                }
                *params.last_mut().unwrap() = init_bias();
            }
        }
        Ok(Self { kind, params, r_max })
    }

    pub fn with_params(kind: RatioKind, params: Vec<f64>, r_max: f64) -> Result<Self> {
        if params.len() != kind.num_params() {
            return Err(Error::InvalidArgument(format!(
                "expected {} parameters, got {}",
                kind.num_params(),
                params.len()
            )));
        }
        Ok(Self { kind, params, r_max })
    }

    fn pre_activation(&self, x: &[f64]) -> f64 {
        let p = &self.params;
        match &self.kind {
            RatioKind::ClassTable { centroids } => p[nearest(centroids, x)],
            RatioKind::LinearSoftplus { dim } => {
                p[..*dim].iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + p[*dim]
            }
            RatioKind::MlpSoftplus { dim, hidden } => {
                let (w1, rest) = p.split_at(hidden * dim);
                let (b1, rest) = rest.split_at(*hidden);
                let (w2, b2) = rest.split_at(*hidden);
                let mut u = b2[0];
                for j in 0..*hidden {
                    let a: f64 = w1[j * dim..(j + 1) * dim].iter().zip(x).map(|(w, v)| w * v).sum();
                    u += w2[j] * (a + b1[j]).tanh();
                }
                u
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (RATIO_EPS + softplus(self.pre_activation(x))).min(self.r_max)
    }

    /// Adds `scale * dr/dθ` at `x` into `grad` and returns r(x). The clamp has
    /// zero derivative once active.
    pub fn accumulate_grad(&self, x: &[f64], scale: f64, grad: &mut [f64]) -> f64 {
        let u = self.pre_activation(x);
        let raw = RATIO_EPS + softplus(u);
        if raw >= self.r_max {
            return self.r_max;
        }
        let s = scale * sigmoid(u);
        let p = &self.params;
        match &self.kind {
            RatioKind::ClassTable { centroids } => grad[nearest(centroids, x)] += s,
            RatioKind::LinearSoftplus { dim } => {
                for i in 0..*dim {
                    grad[i] += s * x[i];
                }
                grad[*dim] += s;
            }
            RatioKind::MlpSoftplus { dim, hidden } => {
                let (d, h) = (*dim, *hidden);
                let w2_off = h * d + h;
                for j in 0..h {
                    let a: f64 = p[j * d..(j + 1) * d].iter().zip(x).map(|(w, v)| w * v).sum();
                    let t = (a + p[h * d + j]).tanh();
                    grad[w2_off + j] += s * t;
                    let back = s * p[w2_off + j] * (1.0 - t * t);
                    for i in 0..d {
                        grad[j * d + i] += back * x[i];
                    }
                    grad[h * d + j] += back;
                }
                grad[w2_off + h] += s;
            }
        }
        raw
    }
}

impl RatioFunction for RatioModel {
    fn ratio(&self, x: &[f64]) -> f64 {
        self.eval(x)
    }
}
