use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// A probability vector over classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ClassProportions {
    weights: Vec<f64>,
}

impl ClassProportions {
    /// Normalise nonnegative raw weights.
    pub fn new(raw: &[f64]) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::InvalidProportions("no classes".into()));
        }
        if let Some(bad) = raw.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidProportions(format!(
                "weight {bad} is negative or non-finite"
            )));
        }
        let total: f64 = raw.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidProportions(
                "all classes have zero probability".into(),
            ));
        }
        Ok(Self {
            weights: raw.iter().map(|w| w / total).collect(),
        })
    }

    pub fn from_counts(counts: &[usize]) -> Result<Self> {
        let raw: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        Self::new(&raw)
    }

    pub fn uniform(num_classes: usize) -> Result<Self> {
        Self::new(&vec![1.0; num_classes])
    }

    pub fn num_classes(&self) -> usize {
        self.weights.len()
    }

    pub fn prob(&self, class: usize) -> f64 {
        self.weights.get(class).copied().unwrap_or(0.0)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }
}

impl TryFrom<Vec<f64>> for ClassProportions {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(&v)
    }
}

impl From<ClassProportions> for Vec<f64> {
    fn from(p: ClassProportions) -> Self {
        p.weights
    }
}

/// Draw `n` natural basis vectors e_i of dimension `d = #classes`, each with
/// probability `proportions[i]`.
pub fn sample_one_hot(proportions: &ClassProportions, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let d = proportions.num_classes();
    let index = WeightedIndex::new(proportions.as_slice())
        .map_err(|e| Error::InvalidProportions(e.to_string()))?;
    let mut rng = rng::from_seed(seed);
    Ok((0..n)
        .map(|_| {
            let mut e = vec![0.0; d];
            e[index.sample(&mut rng)] = 1.0;
            e
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count_first(samples: &[Vec<f64>]) -> usize {
        samples.iter().filter(|s| s[0] == 1.0).count()
    }

    #[test]
    fn degenerate_distribution_repeats_one_basis_vector() {
        let p = ClassProportions::new(&[1.0, 0.0]).unwrap();
        let s = sample_one_hot(&p, 3, 11).unwrap();
        assert_eq!(s, vec![vec![1.0, 0.0]; 3]);
    }

    #[test]
    fn balanced_counts_concentrate() {
        let p = ClassProportions::new(&[0.5, 0.5]).unwrap();
        let n = 10_000;
        let s = sample_one_hot(&p, n, 5).unwrap();
        let k = count_first(&s) as f64;
        let bound = 3.0 * (n as f64 * 0.25).sqrt();
        assert!((k - 5000.0).abs() <= bound, "count {k}");
    }

    #[test]
    fn basis_counts_sum_to_n() {
        let p = ClassProportions::new(&[0.2, 0.3, 0.1, 0.4]).unwrap();
        let s = sample_one_hot(&p, 257, 3).unwrap();
        let mut mu = [0usize; 4];
        for x in &s {
            assert_eq!(x.iter().filter(|v| **v == 1.0).count(), 1);
            assert_eq!(x.iter().sum::<f64>(), 1.0);
            mu[x.iter().position(|v| *v == 1.0).unwrap()] += 1;
        }
        assert_eq!(mu.iter().sum::<usize>(), 257);
    }

    #[test]
    fn deterministic_under_seed() {
        let p = ClassProportions::new(&[0.3, 0.7]).unwrap();
        assert_eq!(sample_one_hot(&p, 50, 9).unwrap(), sample_one_hot(&p, 50, 9).unwrap());
    }

    #[test]
    fn rejects_all_zero_and_negative() {
        assert!(matches!(
            ClassProportions::new(&[0.0, 0.0]),
            Err(Error::InvalidProportions(_))
        ));
        assert!(ClassProportions::new(&[0.5, -0.1]).is_err());
    }

    #[test]
    fn normalises() {
        let p = ClassProportions::new(&[1.0, 3.0]).unwrap();
        assert_eq!(p.as_slice(), &[0.25, 0.75]);
    }
}
