//! Linear, multinomial-logistic and one-hidden-layer MLP predictors with
//! importance-weighted squared and cross-entropy losses.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, StreamTag};
use crate::synthdata::{Label, LabeledSample};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PredictorSpec {
    Linear {
        dim: usize,
        #[serde(default = "yes")]
        intercept: bool,
    },
    Logistic {
        dim: usize,
        classes: usize,
    },
    /// One tanh hidden layer followed by a linear head.
    Mlp {
        dim: usize,
        #[serde(default = "default_hidden")]
        hidden: usize,
        outputs: usize,
    },
}

fn yes() -> bool {
    true
}
fn default_hidden() -> usize {
    32
}

impl PredictorSpec {
    pub fn input_dim(&self) -> usize {
        match *self {
            PredictorSpec::Linear { dim, .. }
            | PredictorSpec::Logistic { dim, .. }
            | PredictorSpec::Mlp { dim, .. } => dim,
        }
    }

    pub fn outputs(&self) -> usize {
        match *self {
            PredictorSpec::Linear { .. } => 1,
            PredictorSpec::Logistic { classes, .. } => classes,
            PredictorSpec::Mlp { outputs, .. } => outputs,
        }
    }

    pub fn num_params(&self) -> usize {
        match *self {
            PredictorSpec::Linear { dim, intercept } => dim + usize::from(intercept),
            PredictorSpec::Logistic { dim, classes } => classes * (dim + 1),
            PredictorSpec::Mlp { dim, hidden, outputs } => hidden * (dim + 1) + outputs * (hidden + 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Squared,
    CrossEntropy,
}

/// Samples paired with nonnegative importance weights.
#[derive(Debug, Clone)]
pub struct WeightedBatch<'a> {
    samples: Vec<&'a LabeledSample>,
    weights: Vec<f64>,
}

impl<'a> WeightedBatch<'a> {
    pub fn new(samples: Vec<&'a LabeledSample>, weights: Vec<f64>) -> Result<Self> {
        if samples.len() != weights.len() {
            return Err(Error::InvalidArgument(format!(
                "{} samples but {} weights",
                samples.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidArgument(format!("weight {w} is negative or non-finite")));
        }
        Ok(Self { samples, weights })
    }

    pub fn unit(samples: &'a [LabeledSample]) -> Self {
        Self {
            samples: samples.iter().collect(),
            weights: vec![1.0; samples.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictor {
    pub spec: PredictorSpec,
    pub params: Vec<f64>,
}

impl Predictor {
    /// Every parameter uniform in ±1/sqrt(fan_in) of its layer.
    pub fn new(spec: PredictorSpec, seed: u64) -> Self {
        let mut rng = rng::stream(seed, StreamTag::Init, 1);
        let mut params = Vec::with_capacity(spec.num_params());
        let mut fill = |n: usize, fan_in: usize, params: &mut Vec<f64>| {
            let b = 1.0 / (fan_in.max(1) as f64).sqrt();
            params.extend((0..n).map(|_| rng.random_range(-b..=b)));
        };
        match spec {
            PredictorSpec::Linear { .. } | PredictorSpec::Logistic { .. } => {
                fill(spec.num_params(), spec.input_dim(), &mut params)
            }
            PredictorSpec::Mlp { dim, hidden, outputs } => {
                fill(hidden * (dim + 1), dim, &mut params);
                fill(outputs * (hidden + 1), hidden, &mut params);
            }
        }
        Self { spec, params }
    }

    pub fn with_params(spec: PredictorSpec, params: Vec<f64>) -> Result<Self> {
        if params.len() != spec.num_params() {
            return Err(Error::InvalidArgument(format!(
                "expected {} parameters, got {}",
                spec.num_params(),
                params.len()
            )));
        }
        Ok(Self { spec, params })
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let p = &self.params;
        match self.spec {
            PredictorSpec::Linear { dim, intercept } => {
                let b = if intercept { p[dim] } else { 0.0 };
                vec![dot(&p[..dim], x) + b]
            }
            PredictorSpec::Logistic { dim, classes } => {
                let (w, b) = p.split_at(classes * dim);
                (0..classes).map(|c| dot(&w[c * dim..(c + 1) * dim], x) + b[c]).collect()
            }
            PredictorSpec::Mlp { dim, hidden, outputs } => {
                let h = self.hidden(x, dim, hidden);
                let (w2, b2) = p[hidden * (dim + 1)..].split_at(outputs * hidden);
                (0..outputs).map(|o| dot(&w2[o * hidden..(o + 1) * hidden], &h) + b2[o]).collect()
            }
        }
    }

    fn hidden(&self, x: &[f64], dim: usize, hidden: usize) -> Vec<f64> {
        let (w1, rest) = self.params.split_at(hidden * dim);
        (0..hidden).map(|j| (dot(&w1[j * dim..(j + 1) * dim], x) + rest[j]).tanh()).collect()
    }

    /// Adds `(d loss / d output)^T (d output / d θ)` into `grad`.
    fn backward(&self, x: &[f64], d_out: &[f64], grad: &mut [f64]) {
        match self.spec {
            PredictorSpec::Linear { dim, intercept } => {
                for i in 0..dim {
                    grad[i] += d_out[0] * x[i];
                }
                if intercept {
                    grad[dim] += d_out[0];
                }
            }
            PredictorSpec::Logistic { dim, classes } => {
                for c in 0..classes {
                    for i in 0..dim {
                        grad[c * dim + i] += d_out[c] * x[i];
                    }
                    grad[classes * dim + c] += d_out[c];
                }
            }
            PredictorSpec::Mlp { dim, hidden, outputs } => {
                let h = self.hidden(x, dim, hidden);
                let w2_off = hidden * (dim + 1);
                let b2_off = w2_off + outputs * hidden;
                let mut d_h = vec![0.0; hidden];
                for o in 0..outputs {
                    for j in 0..hidden {
                        grad[w2_off + o * hidden + j] += d_out[o] * h[j];
                        d_h[j] += d_out[o] * self.params[w2_off + o * hidden + j];
                    }
                    grad[b2_off + o] += d_out[o];
                }
                for j in 0..hidden {
                    let d_a = d_h[j] * (1.0 - h[j] * h[j]);
                    for i in 0..dim {
                        grad[j * dim + i] += d_a * x[i];
                    }
                    grad[hidden * dim + j] += d_a;
                }
            }
        }
    }

    /// Class with the largest output, lowest index on ties.
    pub fn predict_class(&self, x: &[f64]) -> usize {
        argmax(&self.forward(x))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Loss of one output vector and its derivative with respect to that output.
fn sample_loss(out: &[f64], label: &Label, kind: LossKind, want_grad: bool) -> Result<(f64, Vec<f64>)> {
    match (kind, label) {
        (LossKind::Squared, Label::Real(y)) if out.len() == 1 => {
            let r = out[0] - y;
            Ok((r * r, if want_grad { vec![2.0 * r] } else { Vec::new() }))
        }
        (LossKind::CrossEntropy, Label::Class(c)) if *c < out.len() => {
            let lse = log_sum_exp(out);
            let g = if want_grad {
                let mut g: Vec<f64> = out.iter().map(|z| (z - lse).exp()).collect();
                g[*c] -= 1.0;
                g
            } else {
                Vec::new()
            };
            Ok((lse - out[*c], g))
        }
        _ => Err(Error::InvalidArgument(format!(
            "{kind:?} loss incompatible with label {label:?} and {} outputs",
            out.len()
        ))),
    }
}

fn loss_impl(p: &Predictor, batch: &WeightedBatch, kind: LossKind, grad: Option<&mut [f64]>) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let n = batch.len() as f64;
    let want = grad.is_some();
    let mut g_buf = grad;
    let mut total = 0.0;
    for (s, &w) in batch.samples.iter().zip(&batch.weights) {
        let out = p.forward(&s.features);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite predictor output {out:?}")));
        }
        let (l, d) = sample_loss(&out, &s.label, kind, want)?;
        total += w * l;
        if let Some(g) = g_buf.as_deref_mut() {
            if w != 0.0 {
                let scaled: Vec<f64> = d.iter().map(|v| v * w / n).collect();
                p.backward(&s.features, &scaled, g);
            }
        }
    }
    Ok(total / n)
}

/// `(1/|B|) sum_i w_i loss(h(x_i), y_i)`.
pub fn weighted_loss(p: &Predictor, batch: &WeightedBatch, kind: LossKind) -> Result<f64> {
    loss_impl(p, batch, kind, None)
}

/// Exact gradient of [`weighted_loss`].
pub fn weighted_grad(p: &Predictor, batch: &WeightedBatch, kind: LossKind) -> Result<Vec<f64>> {
    Ok(weighted_loss_and_grad(p, batch, kind)?.1)
}

pub fn weighted_loss_and_grad(p: &Predictor, batch: &WeightedBatch, kind: LossKind) -> Result<(f64, Vec<f64>)> {
    let mut g = vec![0.0; p.params.len()];
    let l = loss_impl(p, batch, kind, Some(&mut g))?;
    Ok((l, g))
}

/// Fraction of samples whose argmax prediction equals the class label.
pub fn accuracy(p: &Predictor, eval: &[LabeledSample]) -> Result<f64> {
    if eval.is_empty() {
        return Err(Error::UndefinedMetric("accuracy of an empty evaluation set".into()));
    }
    let mut hit = 0usize;
    for s in eval {
        let c = s
            .label
            .class()
            .ok_or_else(|| Error::UndefinedMetric("accuracy needs class labels".into()))?;
        if p.predict_class(&s.features) == c {
            hit += 1;
        }
    }
    Ok(hit as f64 / eval.len() as f64)
}
