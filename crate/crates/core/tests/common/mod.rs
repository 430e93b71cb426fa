//! Oracles shared by the property tests and the acceptance suite.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

use splitbolfi::gp::{kernel_eval, Hyperparams};

/// GP mean and latent variance at `q` from K⁻¹ formed explicitly.
pub fn dense_oracle(x: &[f64], y: &[f64], hp: Hyperparams, diag: f64, q: f64) -> (f64, f64) {
    let n = x.len();
    let m = y.iter().sum::<f64>() / n as f64;
    let k = DMatrix::from_fn(n, n, |i, j| {
        kernel_eval((x[i] - x[j]).abs(), hp.signal_variance, hp.lengthscale).unwrap() + if i == j { diag } else { 0.0 }
    });
    let kinv = k.try_inverse().expect("invertible");
    let ks = DVector::from_iterator(n, x.iter().map(|&xi| kernel_eval((q - xi).abs(), hp.signal_variance, hp.lengthscale).unwrap()));
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - m));
    let mean = m + (ks.transpose() * &kinv * yc)[0];
    let var = hp.signal_variance - (ks.transpose() * &kinv * &ks)[0];
    (mean, var)
}

/// Row i is accepted iff fewer than n rows beat it, where a row beats i when
/// its discrepancy is smaller, or equal with an earlier index.
pub fn rank_oracle(d: &[f64], n: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (0..d.len())
        .filter(|&i| (0..d.len()).filter(|&k| d[k] < d[i] || (d[k] == d[i] && k < i)).count() < n)
        .collect();
    out.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
    out
}

/// Smooth test function `3 + Σ c_k sin((k+1)x)` on `grid`.
pub fn random_mean(grid: &[f64], coeffs: &[f64]) -> Vec<f64> {
    grid.iter()
        .map(|&x| coeffs.iter().enumerate().map(|(k, c)| c * ((k as f64 + 1.0) * x).sin()).sum::<f64>() + 3.0)
        .collect()
}
