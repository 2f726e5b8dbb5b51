use serde::{Deserialize, Serialize};

use super::fixed::{BiasVariance, RidgeInstance};
use crate::error::{Error, Result};

/// Per-coordinate training counts and weights of a one-hot design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneHotSpectrum {
    pub mu: Vec<usize>,
    pub w: Vec<f64>,
}

impl OneHotSpectrum {
    pub fn new(mu: Vec<usize>, w: Vec<f64>) -> Result<Self> {
        if mu.len() != w.len() || mu.is_empty() {
            return Err(Error::InvalidArgument("mu and w must be nonempty and equally long".into()));
        }
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument("weights must be finite and nonnegative".into()));
        }
        Ok(Self { mu, w })
    }

    pub fn n(&self) -> usize {
        self.mu.iter().sum()
    }

    /// `xi_i = lambda / (lambda + mu_i)`.
    pub fn xi(&self, lambda: f64) -> Vec<f64> {
        self.mu.iter().map(|&m| lambda / (lambda + m as f64)).collect()
    }

    /// Matrix instance with `mu_i` copies of `e_i`, each weighted `w_i`, and
    /// test second moment `diag(lambda_te)`.
    pub fn induced_instance(
        &self,
        theta_star: &[f64],
        lambda_te: &[f64],
        sigma2: f64,
        lambda: f64,
    ) -> RidgeInstance {
        let d = self.mu.len();
        let mut x = Vec::with_capacity(self.n());
        let mut w = Vec::with_capacity(self.n());
        for i in 0..d {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            for _ in 0..self.mu[i] {
                x.push(e.clone());
                w.push(self.w[i]);
            }
        }
        let sigma_te = (0..d)
            .map(|i| (0..d).map(|j| if i == j { lambda_te[i] } else { 0.0 }).collect())
            .collect();
        RidgeInstance { x, w, theta_star: theta_star.to_vec(), sigma2, lambda, sigma_te }
    }
}

/// `B = lambda^2 sum theta_i^2 l'_i / (mu_i w_i + lambda)^2`,
/// `V = sigma^2 sum l'_i mu_i w_i^2 / (mu_i w_i + lambda)^2`.
pub fn bias_variance_onehot(
    spec: &OneHotSpectrum,
    theta_star: &[f64],
    lambda_te: &[f64],
    sigma2: f64,
    lambda: f64,
) -> BiasVariance {
    let mut bias = 0.0;
    let mut variance = 0.0;
    for i in 0..spec.mu.len() {
        let mu = spec.mu[i] as f64;
        let w = spec.w[i];
        let den = (mu * w + lambda).powi(2);
        bias += theta_star[i] * theta_star[i] * lambda_te[i] / den;
        variance += lambda_te[i] * mu * w * w / den;
    }
    BiasVariance { bias: lambda * lambda * bias, variance: sigma2 * variance }
}

/// Unweighted ridge baseline as compared against in the one-hot analysis:
/// unit weights, with the train spectrum `lambda_tr` in place of the test one.
pub fn bias_variance_erm(
    mu: &[usize],
    theta_star: &[f64],
    lambda_tr: &[f64],
    sigma2: f64,
    lambda: f64,
) -> BiasVariance {
    let unit = OneHotSpectrum { mu: mu.to_vec(), w: vec![1.0; mu.len()] };
    bias_variance_onehot(&unit, theta_star, lambda_tr, sigma2, lambda)
}

/// Everything about a one-hot comparison except the weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneHotProblem {
    pub mu: Vec<usize>,
    pub lambda_tr: Vec<f64>,
    pub lambda_te: Vec<f64>,
    pub theta_star: Vec<f64>,
    pub sigma2: f64,
    pub lambda: f64,
}

impl OneHotProblem {
    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn xi(&self) -> Vec<f64> {
        self.mu.iter().map(|&m| self.lambda / (self.lambda + m as f64)).collect()
    }

    /// `sqrt(l'_i / l_i)`.
    pub fn s(&self) -> Vec<f64> {
        self.lambda_te.iter().zip(&self.lambda_tr).map(|(a, b)| (a / b).sqrt()).collect()
    }

    pub fn weighted(&self, w: &[f64]) -> BiasVariance {
        let spec = OneHotSpectrum { mu: self.mu.clone(), w: w.to_vec() };
        bias_variance_onehot(&spec, &self.theta_star, &self.lambda_te, self.sigma2, self.lambda)
    }

    pub fn erm(&self) -> BiasVariance {
        bias_variance_erm(&self.mu, &self.theta_star, &self.lambda_tr, self.sigma2, self.lambda)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ridge::bias_variance_fixed;
    use crate::rng;
    use approx::assert_relative_eq;
    use rand::Rng;

    #[test]
    fn matches_matrix_path_on_random_instances() {
        let mut r = rng::from_seed(5);
        for _ in 0..50 {
            let d = 4;
            let mut mu = vec![0usize; d];
            for _ in 0..50 {
                mu[r.random_range(0..d)] += 1;
            }
            let w: Vec<f64> = (0..d).map(|_| r.random_range(0.0..3.0)).collect();
            let th: Vec<f64> = (0..d).map(|_| r.random_range(-2.0..2.0)).collect();
            let lte: Vec<f64> = (0..d).map(|_| r.random_range(0.01..5.0)).collect();
            let (s2, lam) = (r.random_range(0.01..3.0), r.random_range(0.01..5.0));
            let spec = OneHotSpectrum::new(mu, w).unwrap();
            assert_eq!(spec.n(), 50);
            let closed = bias_variance_onehot(&spec, &th, &lte, s2, lam);
            let matrix = bias_variance_fixed(&spec.induced_instance(&th, &lte, s2, lam)).unwrap();
            assert_relative_eq!(closed.bias, matrix.bias, max_relative = 1e-10);
            assert_relative_eq!(closed.variance, matrix.variance, max_relative = 1e-10);
        }
    }

    #[test]
    fn unit_weights_give_erm_formula() {
        let spec = OneHotSpectrum::new(vec![3, 7], vec![1.0, 1.0]).unwrap();
        let (th, l, s2, lam) = ([1.5, -0.5], [0.4, 2.0], 0.7, 0.9);
        let a = bias_variance_onehot(&spec, &th, &l, s2, lam);
        let b = bias_variance_erm(&[3, 7], &th, &l, s2, lam);
        assert_eq!(a, b);
        let want_b = lam * lam * (th[0] * th[0] * l[0] / (3.0f64 + lam).powi(2) + th[1] * th[1] * l[1] / (7.0f64 + lam).powi(2));
        assert_relative_eq!(a.bias, want_b, max_relative = 1e-14);
    }

    #[test]
    fn unobserved_coordinate() {
        let spec = OneHotSpectrum::new(vec![0, 5], vec![2.0, 1.0]).unwrap();
        let only_second = OneHotSpectrum::new(vec![5], vec![1.0]).unwrap();
        let (th, l) = ([2.0, 1.0], [0.3, 0.8]);
        let both = bias_variance_onehot(&spec, &th, &l, 1.0, 0.5);
        let one = bias_variance_onehot(&only_second, &th[1..], &l[1..], 1.0, 0.5);
        assert_relative_eq!(both.bias - one.bias, 4.0 * 0.3, max_relative = 1e-12);
        assert_relative_eq!(both.variance, one.variance, max_relative = 1e-14);
    }

    #[test]
    fn implicit_regularisation_identity() {
        let mut r = rng::from_seed(12);
        for _ in 0..100 {
            let d = 3;
            let mu: Vec<usize> = (0..d).map(|_| r.random_range(1..50)).collect();
            let ltr: Vec<f64> = (0..d).map(|_| r.random_range(0.01..10.0)).collect();
            let lte: Vec<f64> = (0..d).map(|_| r.random_range(0.01..10.0)).collect();
            let th: Vec<f64> = (0..d).map(|_| r.random_range(-2.0..2.0)).collect();
            let lam = r.random_range(0.01..10.0);
            let w: Vec<f64> = (0..d).map(|i| (lte[i] / ltr[i]).sqrt()).collect();
            let spec = OneHotSpectrum::new(mu.clone(), w).unwrap();
            let a = bias_variance_onehot(&spec, &th, &lte, 1.0, lam).bias;
            let b = lam * lam
                * (0..d)
                    .map(|i| {
                        th[i] * th[i] * ltr[i]
                            / (mu[i] as f64 + (ltr[i] / lte[i]).sqrt() * lam).powi(2)
                    })
                    .sum::<f64>();
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn depends_on_weights_only_through_aggregates() {
        // Rows of e_0 weighted (0, 3, 3) and (1, 1, 4): equal sums and sums of squares.
        let base = OneHotSpectrum::new(vec![3, 2], vec![1.0, 0.5]).unwrap();
        let mut a = base.induced_instance(&[1.0, -1.0], &[0.7, 1.3], 0.4, 0.6);
        let mut b = a.clone();
        a.w[..3].copy_from_slice(&[0.0, 3.0, 3.0]);
        b.w[..3].copy_from_slice(&[1.0, 1.0, 4.0]);
        b.w.swap(3, 4);
        let (ra, rb) = (bias_variance_fixed(&a).unwrap(), bias_variance_fixed(&b).unwrap());
        assert_relative_eq!(ra.bias, rb.bias, max_relative = 1e-12);
        assert_relative_eq!(ra.variance, rb.variance, max_relative = 1e-12);
    }
}
