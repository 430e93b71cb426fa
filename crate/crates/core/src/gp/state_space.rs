//! O(n) log marginal likelihood for a 1-D Matérn-5/2 GP.
//!
//! The Matérn-5/2 process is the stationary solution of a third-order linear
//! SDE, so its marginal likelihood on sorted inputs can be accumulated with a
//! Kalman filter over the state (f, f', f''). This is the objective evaluated
//! inside hyperparameter search; the dense Cholesky route in the parent module
//! is the reference it is checked against.

use nalgebra::{Matrix3, Vector3};

const SQRT_5: f64 = 2.236_067_977_499_79;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

struct Matern52Sde {
    lambda: f64,
    stationary: Matrix3<f64>,
}

impl Matern52Sde {
    fn new(sigma_f2: f64, lengthscale: f64) -> Self {
        let lambda = SQRT_5 / lengthscale;
        let l2 = lambda * lambda;
        let s = sigma_f2;
        #[rustfmt::skip]
        let stationary = Matrix3::new(
            s,             0.0,           -s * l2 / 3.0,
            0.0,           s * l2 / 3.0,  0.0,
            -s * l2 / 3.0, 0.0,           s * l2 * l2,
        );
        Self { lambda, stationary }
    }

    /// exp(F·dt). F has the single eigenvalue −λ with multiplicity three, so
    /// N = F + λI is nilpotent and the exponential series stops at N².
    fn transition(&self, dt: f64) -> Matrix3<f64> {
        let l = self.lambda;
        #[rustfmt::skip]
        let n = Matrix3::new(
            l,          1.0,            0.0,
            0.0,        l,              1.0,
            -l * l * l, -3.0 * l * l,   -2.0 * l,
        );
        let n2 = n * n;
        (Matrix3::identity() + n * dt + n2 * (0.5 * dt * dt)) * (-l * dt).exp()
    }
}

/// Log marginal likelihood of `centered` targets (prior mean already removed)
/// under a zero-mean Matérn-5/2 GP with observation variance `noise`.
pub fn log_marginal_likelihood(
    inputs: &[f64],
    centered: &[f64],
    sigma_f2: f64,
    lengthscale: f64,
    noise: f64,
) -> f64 {
    debug_assert_eq!(inputs.len(), centered.len());
    let order = sorted_order(inputs);
    log_marginal_likelihood_sorted(inputs, centered, &order, sigma_f2, lengthscale, noise)
}

/// Indices of `inputs` in ascending order.
pub fn sorted_order(inputs: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    order.sort_by(|&a, &b| inputs[a].total_cmp(&inputs[b]));
    order
}

/// As [`log_marginal_likelihood`] with the sort order precomputed.
pub fn log_marginal_likelihood_sorted(
    inputs: &[f64],
    centered: &[f64],
    order: &[usize],
    sigma_f2: f64,
    lengthscale: f64,
    noise: f64,
) -> f64 {
    let sde = Matern52Sde::new(sigma_f2, lengthscale);
    let mut mean = Vector3::zeros();
    let mut cov = sde.stationary;
    let mut prev: Option<f64> = None;
    let mut ll = 0.0;
    for &idx in order {
        let x = inputs[idx];
        if let Some(xp) = prev {
            let dt = x - xp;
            if dt > 0.0 {
                let a = sde.transition(dt);
                mean = a * mean;
                cov = sde.stationary + a * (cov - sde.stationary) * a.transpose();
            }
        }
        prev = Some(x);

        let s = cov[(0, 0)] + noise;
        if !(s > 0.0) {
            return f64::NEG_INFINITY;
        }
        let resid = centered[idx] - mean[0];
        let gain: Vector3<f64> = cov.column(0) / s;
        mean += gain * resid;
        cov -= gain * gain.transpose() * s;
        cov = (cov + cov.transpose()) * 0.5;
        ll -= 0.5 * (LN_2PI + s.ln() + resid * resid / s);
    }
    ll
}

/// Posterior mean (of the centred process) and variance at ascending
/// `queries`, by a Kalman filter and Rauch-Tung-Striebel smoother over the
/// merged sequence of training inputs and queries. O(n + m).
pub fn posterior_at_sorted(
    inputs: &[f64],
    centered: &[f64],
    sigma_f2: f64,
    lengthscale: f64,
    noise: f64,
    queries: &[f64],
) -> Vec<(f64, f64)> {
    debug_assert!(queries.windows(2).all(|w| w[0] <= w[1]));
    let sde = Matern52Sde::new(sigma_f2, lengthscale);
    let order = sorted_order(inputs);

    // Sites: (position, observation or query slot).
    enum Site {
        Obs(f64),
        Query(usize),
    }
    let mut sites: Vec<(f64, Site)> = Vec::with_capacity(inputs.len() + queries.len());
    let (mut i, mut k) = (0, 0);
    while i < order.len() || k < queries.len() {
        let take_obs = k == queries.len() || (i < order.len() && inputs[order[i]] <= queries[k]);
        if take_obs {
            sites.push((inputs[order[i]], Site::Obs(centered[order[i]])));
            i += 1;
        } else {
            sites.push((queries[k], Site::Query(k)));
            k += 1;
        }
    }

    let n = sites.len();
    let mut filt_m = Vec::with_capacity(n);
    let mut filt_p = Vec::with_capacity(n);
    let mut pred_m = Vec::with_capacity(n);
    let mut pred_p = Vec::with_capacity(n);
    let mut trans = Vec::with_capacity(n);
    let mut mean = Vector3::zeros();
    let mut cov = sde.stationary;
    for (idx, (x, site)) in sites.iter().enumerate() {
        let a = if idx == 0 { Matrix3::identity() } else { sde.transition(x - sites[idx - 1].0) };
        if idx > 0 {
            mean = a * mean;
            cov = sde.stationary + a * (cov - sde.stationary) * a.transpose();
        }
        pred_m.push(mean);
        pred_p.push(cov);
        trans.push(a);
        if let Site::Obs(y) = site {
            let s = cov[(0, 0)] + noise;
            let gain: Vector3<f64> = cov.column(0) / s;
            mean += gain * (y - mean[0]);
            cov -= gain * gain.transpose() * s;
            cov = (cov + cov.transpose()) * 0.5;
        }
        filt_m.push(mean);
        filt_p.push(cov);
    }

    let mut out = vec![(0.0, 0.0); queries.len()];
    let mut sm = filt_m[n - 1];
    let mut sp = filt_p[n - 1];
    if let Site::Query(q) = sites[n - 1].1 {
        out[q] = (sm[0], sp[(0, 0)].max(0.0));
    }
    for idx in (0..n - 1).rev() {
        let a = trans[idx + 1];
        let pp = pred_p[idx + 1];
        // G = P_f Aᵀ P_pred⁻¹, solved through the symmetric predicted covariance.
        let rhs = a * filt_p[idx];
        let g_t = match pp.cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => pp.try_inverse().unwrap_or_else(Matrix3::zeros) * rhs,
        };
        let g = g_t.transpose();
        sm = filt_m[idx] + g * (sm - pred_m[idx + 1]);
        sp = filt_p[idx] + g * (sp - pp) * g_t;
        sp = (sp + sp.transpose()) * 0.5;
        if let Site::Query(q) = sites[idx].1 {
            out[q] = (sm[0], sp[(0, 0)].max(0.0));
        }
    }
    out
}
