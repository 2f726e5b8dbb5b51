use fedshift::ridge::{bias_variance_fixed, weighted_ridge_solve, RidgeInstance};
use proptest::prelude::*;

/// Normal equations solved by Gaussian elimination with partial pivoting.
fn reference_solve(x: &[Vec<f64>], w: &[f64], y: &[f64], lambda: f64) -> Vec<f64> {
    let d = x[0].len();
    let mut a = vec![vec![0.0; d + 1]; d];
    for i in 0..d {
        for j in 0..d {
            a[i][j] = x.iter().zip(w).map(|(r, wi)| wi * r[i] * r[j]).sum::<f64>();
        }
        a[i][i] += lambda;
        a[i][d] = x.iter().zip(w).zip(y).map(|((r, wi), yi)| wi * r[i] * yi).sum();
    }
    for c in 0..d {
        let p = (c..d).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        let pivot = a[c].clone();
        for row in a.iter_mut().skip(c + 1) {
            let f = row[c] / pivot[c];
            for (v, p) in row.iter_mut().zip(&pivot).skip(c) {
                *v -= f * p;
            }
        }
    }
    let mut th = vec![0.0; d];
    for c in (0..d).rev() {
        th[c] = (a[c][d] - (c + 1..d).map(|k| a[c][k] * th[k]).sum::<f64>()) / a[c][c];
    }
    th
}

fn design(n: usize, d: usize) -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>, Vec<f64>)> {
    (
        prop::collection::vec(prop::collection::vec(-2.0..2.0f64, d), n),
        prop::collection::vec(0.1..3.0f64, n),
        prop::collection::vec(-1.0..1.0f64, n),
    )
}

proptest! {
    #[test]
    fn solver_matches_reference_elimination((x, w, y) in design(12, 3), lambda in 0.01..2.0f64) {
        let got = weighted_ridge_solve(&x, &w, &y, lambda).unwrap();
        let want = reference_solve(&x, &w, &y, lambda);
        for (g, r) in got.iter().zip(&want) {
            prop_assert!((g - r).abs() <= 1e-9 * (1.0 + r.abs()), "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn scaling_weights_and_penalty_together_leaves_the_solution(
        (x, w, y) in design(10, 2), lambda in 0.01..1.0f64, s in 0.1..10.0f64,
    ) {
        let a = weighted_ridge_solve(&x, &w, &y, lambda).unwrap();
        let ws: Vec<f64> = w.iter().map(|v| v * s).collect();
        let b = weighted_ridge_solve(&x, &ws, &y, lambda * s).unwrap();
        for (p, q) in a.iter().zip(&b) {
            prop_assert!((p - q).abs() <= 1e-9 * (1.0 + p.abs()));
        }
    }
}

#[test]
fn noiseless_data_is_recovered_as_the_penalty_vanishes() {
    let x: Vec<Vec<f64>> = (0..20).map(|i| vec![1.0, i as f64 / 10.0, ((i * 7) % 5) as f64]).collect();
    let theta = [0.5, -1.5, 2.0];
    let y: Vec<f64> = x.iter().map(|r| r.iter().zip(&theta).map(|(a, b)| a * b).sum()).collect();
    let got = weighted_ridge_solve(&x, &[1.0; 20], &y, 1e-12).unwrap();
    for (g, t) in got.iter().zip(&theta) {
        assert!((g - t).abs() < 1e-8);
    }
}

#[test]
fn bias_and_variance_in_one_dimension() {
    // d = 1: A = Σ w x² + λ, bias = λ² θ² s / A², var = σ² s Σ w² x² / A².
    let inst = RidgeInstance {
        x: vec![vec![1.0], vec![2.0], vec![-1.0]],
        w: vec![0.5, 2.0, 1.0],
        theta_star: vec![1.5],
        sigma2: 0.3,
        lambda: 0.7,
        sigma_te: vec![vec![2.0]],
    };
    let a: f64 = 0.5 + 8.0 + 1.0 + 0.7;
    let bias = 0.49 * 2.25 * 2.0 / (a * a);
    let var = 0.3 * 2.0 * (0.25 + 16.0 + 1.0) / (a * a);
    let bv = bias_variance_fixed(&inst).unwrap();
    assert!((bv.bias - bias).abs() < 1e-14);
    assert!((bv.variance - var).abs() < 1e-14);
}

#[test]
fn mismatched_lengths_are_rejected() {
    assert!(weighted_ridge_solve(&[vec![1.0]], &[1.0, 2.0], &[1.0], 0.1).is_err());
}
