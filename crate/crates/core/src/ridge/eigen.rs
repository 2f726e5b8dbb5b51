use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenRow {
    pub index: usize,
    pub lambda_tr: f64,
    pub lambda_te: f64,
    /// `sqrt(l'_i / l_i)`.
    pub ratio: f64,
    /// `(1 + sqrt(1 + 4 xi_i)) / 2` with `xi_i = lambda / (lambda + n l_i)`.
    pub bound: f64,
    pub within_bound: bool,
    /// Either eigenvalue is tiny relative to the largest one, so the ratio is
    /// numerically unreliable.
    pub near_zero: bool,
}

const RANK_TOL: f64 = 1e-12;
const NEAR_ZERO: f64 = 1e-6;

fn descending_eigenvalues(xs: &[Vec<f64>], d: usize) -> Result<Vec<f64>> {
    if xs.is_empty() {
        return Err(Error::InvalidArgument("second moment of an empty sample".into()));
    }
    let n = xs.len() as f64;
    let m = DMatrix::from_fn(d, d, |i, j| xs.iter().map(|x| x[i] * x[j]).sum::<f64>() / n);
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    Ok(ev)
}

/// Pair the descending eigenvalues of the empirical train and test second
/// moments. Rows stop at the numerical rank of the train second moment.
pub fn eigen_ratio_report(train: &[Vec<f64>], test: &[Vec<f64>], lambda: f64) -> Result<Vec<EigenRow>> {
    let d = train.first().map_or(0, |x| x.len());
    if d == 0 || test.iter().any(|x| x.len() != d) || train.iter().any(|x| x.len() != d) {
        return Err(Error::InvalidArgument("train and test features must share a positive dimension".into()));
    }
    let tr = descending_eigenvalues(train, d)?;
    let te = descending_eigenvalues(test, d)?;
    let top = tr[0].max(te[0]).max(f64::MIN_POSITIVE);
    let n = train.len() as f64;
    Ok(tr
        .iter()
        .zip(&te)
        .enumerate()
        .take_while(|(_, (l, _))| **l > RANK_TOL * top)
        .map(|(index, (&l, &lp))| {
            let ratio = (lp.max(0.0) / l).sqrt();
            let xi = lambda / (lambda + n * l);
            let bound = (1.0 + (1.0 + 4.0 * xi).sqrt()) / 2.0;
            EigenRow {
                index,
                lambda_tr: l,
                lambda_te: lp,
                ratio,
                bound,
                within_bound: ratio < bound,
                near_zero: l < NEAR_ZERO * top || lp < NEAR_ZERO * top,
            }
        })
        .collect())
}

pub fn write_eigen_csv<W: Write>(mut out: W, rows: &[EigenRow]) -> Result<()> {
    let io = |e: std::io::Error| Error::Io(e.to_string());
    writeln!(out, "i,lambda_tr,lambda_te,ratio,bound,within_bound,near_zero").map_err(io)?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.index, r.lambda_tr, r.lambda_te, r.ratio, r.bound, r.within_bound, r.near_zero
        )
        .map_err(io)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples_give_unit_ratios() {
        let xs: Vec<Vec<f64>> = (0..20).map(|i| vec![(i as f64).sin(), (i as f64 * 0.3).cos(), 1.0]).collect();
        let rows = eigen_ratio_report(&xs, &xs, 0.1).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.ratio == 1.0 && r.within_bound));
    }

    #[test]
    fn shrunken_test_spectrum_stays_within_bound() {
        let tr: Vec<Vec<f64>> = (0..40).map(|i| vec![(i % 5) as f64 - 2.0, (i % 7) as f64 - 3.0]).collect();
        let te: Vec<Vec<f64>> = tr.iter().map(|x| x.iter().map(|v| 0.5 * v).collect()).collect();
        let rows = eigen_ratio_report(&tr, &te, 1.0).unwrap();
        assert!(rows.iter().all(|r| r.ratio <= 1.0 + 1e-12 && r.within_bound));
    }

    #[test]
    fn length_is_rank() {
        // Rank-1 train data in 3 dimensions.
        let tr: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 2.0 * i as f64, 0.0]).collect();
        let te: Vec<Vec<f64>> = (0..10).map(|i| vec![1.0, i as f64, 0.5]).collect();
        assert_eq!(eigen_ratio_report(&tr, &te, 1.0).unwrap().len(), 1);
    }
}
