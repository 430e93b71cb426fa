//! One-dimensional Gaussian-process regression of a discrepancy on a single
//! parameter.
//!
//! The surrogate uses a constant prior mean equal to the mean of the observed
//! targets, a Matérn covariance, and Gaussian observation noise. Hyperparameters
//! (signal variance, lengthscale, noise variance) are fitted by maximising the
//! log marginal likelihood plus the log hyperprior density with a multi-start
//! Nelder-Mead search in log space.

mod kernel;
pub mod state_space;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{ensure_finite, Error, Result};
use crate::optim::{nelder_mead, NelderMeadOptions};

pub use kernel::{kernel_eval, MaternOrder};

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const MAX_JITTER_ESCALATIONS: usize = 8;

/// Hyperpriors and numerical settings for [`fit_hyperparams`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    pub order: MaternOrder,
    /// Rate of the exponential hyperprior on the signal variance.
    pub variance_prior_rate: f64,
    pub lengthscale_prior_shape: f64,
    pub lengthscale_prior_rate: f64,
    /// When set, the lengthscale is held at this value and its hyperprior is ignored.
    pub lengthscale_fixed: Option<f64>,
    /// Rate of the exponential hyperprior on the observation-noise variance.
    pub noise_prior_rate: f64,
    /// Jitter added to the Gram diagonal, relative to the signal variance.
    pub noise_floor: f64,
    /// Number of hyperprior draws used as optimiser starts.
    pub n_restarts: usize,
    pub max_evals_per_start: usize,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            order: MaternOrder::FiveHalves,
            variance_prior_rate: 1.0,
            lengthscale_prior_shape: 2.0,
            lengthscale_prior_rate: 2.0,
            lengthscale_fixed: None,
            noise_prior_rate: 1.0,
            noise_floor: 1e-6,
            n_restarts: 5,
            max_evals_per_start: 250,
        }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("variance_prior_rate", self.variance_prior_rate),
            ("lengthscale_prior_shape", self.lengthscale_prior_shape),
            ("lengthscale_prior_rate", self.lengthscale_prior_rate),
            ("noise_prior_rate", self.noise_prior_rate),
            ("noise_floor", self.noise_floor),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("kernel.{name} must be a positive finite number, got {v}")));
            }
        }
        if let Some(l) = self.lengthscale_fixed {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::Config(format!("kernel.lengthscale_fixed must be positive, got {l}")));
            }
        }
        if self.n_restarts == 0 {
            return Err(Error::Config("kernel.n_restarts must be at least 1".into()));
        }
        Ok(())
    }

    /// Hyperparameters at the hyperprior means; used when there is too little
    /// data to fit anything.
    pub fn prior_mean_hyperparams(&self) -> Hyperparams {
        Hyperparams {
            signal_variance: 1.0 / self.variance_prior_rate,
            lengthscale: self
                .lengthscale_fixed
                .unwrap_or(self.lengthscale_prior_shape / self.lengthscale_prior_rate),
            noise_variance: 1.0 / self.noise_prior_rate,
        }
    }

    fn log_hyperprior(&self, hp: &Hyperparams) -> f64 {
        let ln_exp = |x: f64, rate: f64| rate.ln() - rate * x;
        let mut lp = ln_exp(hp.signal_variance, self.variance_prior_rate)
            + ln_exp(hp.noise_variance, self.noise_prior_rate);
        if self.lengthscale_fixed.is_none() {
            let (k, r) = (self.lengthscale_prior_shape, self.lengthscale_prior_rate);
            lp += k * r.ln() - ln_gamma(k) + (k - 1.0) * hp.lengthscale.ln() - r * hp.lengthscale;
        }
        lp
    }

    fn draw_start<R: Rng + ?Sized>(&self, rng: &mut R) -> Hyperparams {
        let exp = |rate: f64, rng: &mut R| Exp::new(rate).map(|d| d.sample(rng)).unwrap_or(1.0 / rate);
        let signal_variance = exp(self.variance_prior_rate, rng);
        let noise_variance = exp(self.noise_prior_rate, rng);
        let lengthscale = match self.lengthscale_fixed {
            Some(l) => l,
            None => Gamma::new(self.lengthscale_prior_shape, 1.0 / self.lengthscale_prior_rate)
                .map(|d| d.sample(rng))
                .unwrap_or(self.lengthscale_prior_shape / self.lengthscale_prior_rate),
        };
        Hyperparams { signal_variance, lengthscale, noise_variance }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub signal_variance: f64,
    pub lengthscale: f64,
    pub noise_variance: f64,
}

// Search box for log-hyperparameters: (signal variance, lengthscale, noise variance).
const LOG_LOWER: [f64; 3] = [-18.4, -6.9, -23.0];
const LOG_UPPER: [f64; 3] = [13.8, 6.9, 9.2];

impl Hyperparams {
    fn to_log(self) -> [f64; 3] {
        [self.signal_variance.ln(), self.lengthscale.ln(), self.noise_variance.ln()]
    }

    fn from_log(u: &[f64]) -> Self {
        Self { signal_variance: u[0].exp(), lengthscale: u[1].exp(), noise_variance: u[2].exp() }
    }

    fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(self.signal_variance) && ok(self.lengthscale) && self.noise_variance.is_finite() && self.noise_variance >= 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid hyperparameters {self:?}")))
        }
    }
}

/// Serialized form of a surrogate; the factorization is recomputed on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct GpSnapshot {
    order: MaternOrder,
    inputs: Vec<f64>,
    targets: Vec<f64>,
    hyperparams: Hyperparams,
    noise_floor: f64,
    prior_only: bool,
}

/// A conditioned 1-D GP. Immutable once built.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(into = "GpSnapshot", try_from = "GpSnapshot")]
pub struct GpSurrogate {
    order: MaternOrder,
    inputs: Vec<f64>,
    targets: Vec<f64>,
    prior_mean: f64,
    hyperparams: Hyperparams,
    noise_floor: f64,
    /// Absolute jitter actually used (after any escalation).
    jitter: f64,
    /// `None` for the prior-only predictor.
    factor: Option<Cholesky<f64, Dyn>>,
    alpha: DVector<f64>,
}

impl From<GpSurrogate> for GpSnapshot {
    fn from(gp: GpSurrogate) -> Self {
        GpSnapshot {
            order: gp.order,
            prior_only: gp.factor.is_none(),
            inputs: gp.inputs,
            targets: gp.targets,
            hyperparams: gp.hyperparams,
            noise_floor: gp.noise_floor,
        }
    }
}

impl TryFrom<GpSnapshot> for GpSurrogate {
    type Error = Error;

    fn try_from(s: GpSnapshot) -> Result<Self> {
        if s.prior_only {
            Ok(GpSurrogate::prior_only(&s.inputs, &s.targets, s.hyperparams, s.order, s.noise_floor))
        } else {
            GpSurrogate::condition(&s.inputs, &s.targets, s.hyperparams, s.order, s.noise_floor)
        }
    }
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

fn gram(inputs: &[f64], hp: &Hyperparams, order: MaternOrder, diag: f64) -> DMatrix<f64> {
    let n = inputs.len();
    DMatrix::from_fn(n, n, |i, j| {
        let k = order.eval(inputs[i] - inputs[j], hp.signal_variance, hp.lengthscale);
        if i == j {
            k + diag
        } else {
            k
        }
    })
}

fn check_training(inputs: &[f64], targets: &[f64]) -> Result<()> {
    if inputs.len() != targets.len() {
        return Err(Error::DimensionMismatch { expected: inputs.len(), got: targets.len() });
    }
    for (&x, &y) in inputs.iter().zip(targets) {
        ensure_finite(x, "GP input")?;
        ensure_finite(y, "GP target")?;
    }
    Ok(())
}

impl GpSurrogate {
    /// Condition on the training data with fixed hyperparameters.
    pub fn condition(
        inputs: &[f64],
        targets: &[f64],
        hyperparams: Hyperparams,
        order: MaternOrder,
        noise_floor: f64,
    ) -> Result<Self> {
        check_training(inputs, targets)?;
        hyperparams.validate()?;
        if inputs.is_empty() {
            return Ok(Self::prior_only(inputs, targets, hyperparams, order, noise_floor));
        }
        let prior_mean = mean(targets);
        let mut jitter = noise_floor * hyperparams.signal_variance;
        for _ in 0..=MAX_JITTER_ESCALATIONS {
            let k = gram(inputs, &hyperparams, order, hyperparams.noise_variance + jitter);
            if let Some(factor) = k.cholesky() {
                let centered = DVector::from_iterator(targets.len(), targets.iter().map(|y| y - prior_mean));
                let alpha = factor.solve(&centered);
                return Ok(Self {
                    order,
                    inputs: inputs.to_vec(),
                    targets: targets.to_vec(),
                    prior_mean,
                    hyperparams,
                    noise_floor,
                    jitter,
                    factor: Some(factor),
                    alpha,
                });
            }
            jitter = if jitter > 0.0 { jitter * 10.0 } else { 1e-10 * hyperparams.signal_variance };
        }
        Err(Error::Degenerate)
    }

    /// Predictor returning (prior mean, signal variance) everywhere.
    fn prior_only(inputs: &[f64], targets: &[f64], hyperparams: Hyperparams, order: MaternOrder, noise_floor: f64) -> Self {
        Self {
            order,
            inputs: inputs.to_vec(),
            targets: targets.to_vec(),
            prior_mean: mean(targets),
            hyperparams,
            noise_floor,
            jitter: noise_floor * hyperparams.signal_variance,
            factor: None,
            alpha: DVector::zeros(0),
        }
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn hyperparams(&self) -> Hyperparams {
        self.hyperparams
    }

    pub fn prior_mean(&self) -> f64 {
        self.prior_mean
    }

    pub fn order(&self) -> MaternOrder {
        self.order
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn is_prior_only(&self) -> bool {
        self.factor.is_none()
    }

    /// Lower-triangular factor of the regularised Gram matrix.
    pub fn gram_factor(&self) -> Option<DMatrix<f64>> {
        self.factor.as_ref().map(|f| f.l())
    }

    pub fn alpha(&self) -> &[f64] {
        self.alpha.as_slice()
    }

    /// Posterior mean and variance at `query`.
    pub fn predict(&self, query: f64) -> Result<(f64, f64)> {
        ensure_finite(query, "GP query")?;
        Ok(self.predict_unchecked(query))
    }

    pub(crate) fn predict_unchecked(&self, query: f64) -> (f64, f64) {
        let hp = &self.hyperparams;
        let Some(factor) = &self.factor else {
            return (self.prior_mean, hp.signal_variance);
        };
        let kstar = DVector::from_iterator(
            self.inputs.len(),
            self.inputs.iter().map(|&x| self.order.eval(query - x, hp.signal_variance, hp.lengthscale)),
        );
        let mean = self.prior_mean + kstar.dot(&self.alpha);
        let v = factor.l_dirty().solve_lower_triangular(&kstar).unwrap_or_else(|| kstar.clone());
        let var = (hp.signal_variance - v.norm_squared()).max(0.0);
        (mean, var)
    }

    /// Posterior mean only; cheaper than [`predict`](Self::predict).
    pub(crate) fn predict_mean_unchecked(&self, query: f64) -> f64 {
        let hp = &self.hyperparams;
        if self.factor.is_none() {
            return self.prior_mean;
        }
        self.prior_mean
            + self
                .inputs
                .iter()
                .zip(self.alpha.iter())
                .map(|(&x, a)| a * self.order.eval(query - x, hp.signal_variance, hp.lengthscale))
                .sum::<f64>()
    }

    /// Batched prediction; one triangular solve for all queries.
    pub fn predict_many(&self, queries: &[f64]) -> Result<Vec<(f64, f64)>> {
        for &q in queries {
            ensure_finite(q, "GP query")?;
        }
        let hp = &self.hyperparams;
        let Some(factor) = &self.factor else {
            return Ok(vec![(self.prior_mean, hp.signal_variance); queries.len()]);
        };
        let n = self.inputs.len();
        let kstar = DMatrix::from_fn(n, queries.len(), |i, j| {
            self.order.eval(queries[j] - self.inputs[i], hp.signal_variance, hp.lengthscale)
        });
        let means = kstar.tr_mul(&self.alpha);
        let v = factor.l_dirty().solve_lower_triangular(&kstar).unwrap_or_else(|| kstar.clone());
        Ok((0..queries.len())
            .map(|j| {
                let var = (hp.signal_variance - v.column(j).norm_squared()).max(0.0);
                (self.prior_mean + means[j], var)
            })
            .collect())
    }

    /// Mean and variance at ascending `queries`. For the Matérn-5/2 kernel this
    /// runs a state-space smoother in O(n + m); other orders fall back to
    /// [`predict_many`](Self::predict_many).
    pub fn predict_sorted(&self, queries: &[f64]) -> Result<Vec<(f64, f64)>> {
        if queries.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(Error::InvalidInput("queries must be finite and ascending".into()));
        }
        if self.factor.is_none() || self.order != MaternOrder::FiveHalves {
            return self.predict_many(queries);
        }
        for &q in queries {
            ensure_finite(q, "GP query")?;
        }
        let hp = &self.hyperparams;
        let centered: Vec<f64> = self.targets.iter().map(|y| y - self.prior_mean).collect();
        let noise = hp.noise_variance + self.jitter;
        Ok(state_space::posterior_at_sorted(&self.inputs, &centered, hp.signal_variance, hp.lengthscale, noise, queries)
            .into_iter()
            .map(|(m, v)| (m + self.prior_mean, v))
            .collect())
    }

    /// Log marginal likelihood of the centred targets via the Cholesky factor.
    pub fn log_marginal_likelihood(&self) -> f64 {
        match &self.factor {
            None => 0.0,
            Some(f) => {
                let n = self.inputs.len() as f64;
                let centered = DVector::from_iterator(self.targets.len(), self.targets.iter().map(|y| y - self.prior_mean));
                let log_det: f64 = f.l_dirty().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
                -0.5 * (centered.dot(&self.alpha) + log_det + n * LN_2PI)
            }
        }
    }
}

/// Dense-Cholesky log marginal likelihood, the reference route for the
/// hyperparameter objective.
pub fn dense_log_marginal_likelihood(
    inputs: &[f64],
    centered: &[f64],
    hp: &Hyperparams,
    order: MaternOrder,
    diag: f64,
) -> f64 {
    let n = inputs.len();
    let Some(factor) = gram(inputs, hp, order, diag).cholesky() else {
        return f64::NEG_INFINITY;
    };
    let y = DVector::from_column_slice(centered);
    let alpha = factor.solve(&y);
    let log_det: f64 = factor.l_dirty().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
    -0.5 * (y.dot(&alpha) + log_det + n as f64 * LN_2PI)
}

fn log_marginal(
    inputs: &[f64],
    centered: &[f64],
    sorted: &[usize],
    hp: &Hyperparams,
    order: MaternOrder,
    noise_floor: f64,
) -> f64 {
    let diag = hp.noise_variance + noise_floor * hp.signal_variance;
    match order {
        MaternOrder::FiveHalves => {
            state_space::log_marginal_likelihood_sorted(inputs, centered, sorted, hp.signal_variance, hp.lengthscale, diag)
        }
        _ => dense_log_marginal_likelihood(inputs, centered, hp, order, diag),
    }
}

/// Log marginal likelihood plus log hyperprior density, the MAP objective.
pub fn log_posterior_objective(inputs: &[f64], targets: &[f64], hp: &Hyperparams, config: &KernelConfig) -> f64 {
    let m = mean(targets);
    let centered: Vec<f64> = targets.iter().map(|y| y - m).collect();
    let sorted = state_space::sorted_order(inputs);
    log_marginal(inputs, &centered, &sorted, hp, config.order, config.noise_floor) + config.log_hyperprior(hp)
}

/// MAP hyperparameter fit followed by conditioning.
///
/// Starts are `config.n_restarts` hyperprior draws from `rng`, plus `warm_start`
/// when given. With fewer than two points the prior-only predictor is returned.
pub fn fit_hyperparams<R: Rng + ?Sized>(
    inputs: &[f64],
    targets: &[f64],
    config: &KernelConfig,
    rng: &mut R,
    warm_start: Option<Hyperparams>,
) -> Result<GpSurrogate> {
    check_training(inputs, targets)?;
    config.validate()?;
    if inputs.len() < 2 {
        return Ok(GpSurrogate::prior_only(inputs, targets, config.prior_mean_hyperparams(), config.order, config.noise_floor));
    }

    let m = mean(targets);
    let centered: Vec<f64> = targets.iter().map(|y| y - m).collect();
    let fixed_ls = config.lengthscale_fixed;
    // With a fixed lengthscale the search runs over (signal, noise) only.
    let expand = |u: &[f64]| -> Hyperparams {
        match fixed_ls {
            Some(l) => Hyperparams { signal_variance: u[0].exp(), lengthscale: l, noise_variance: u[1].exp() },
            None => Hyperparams::from_log(u),
        }
    };
    let compress = |hp: Hyperparams| -> Vec<f64> {
        let u = hp.to_log();
        match fixed_ls {
            Some(_) => vec![u[0], u[2]],
            None => u.to_vec(),
        }
    };
    let (lower, upper): (Vec<f64>, Vec<f64>) = match fixed_ls {
        Some(_) => (vec![LOG_LOWER[0], LOG_LOWER[2]], vec![LOG_UPPER[0], LOG_UPPER[2]]),
        None => (LOG_LOWER.to_vec(), LOG_UPPER.to_vec()),
    };
    let sorted = state_space::sorted_order(inputs);
    let objective = |u: &[f64]| -> f64 {
        let hp = expand(u);
        let v = log_marginal(inputs, &centered, &sorted, &hp, config.order, config.noise_floor) + config.log_hyperprior(&hp);
        if v.is_finite() {
            -v
        } else {
            f64::INFINITY
        }
    };

    let mut starts: Vec<Hyperparams> = (0..config.n_restarts).map(|_| config.draw_start(rng)).collect();
    if let Some(ws) = warm_start {
        if ws.validate().is_ok() && ws.noise_variance > 0.0 {
            starts.push(ws);
        }
    }
    let opts = NelderMeadOptions { max_evals: config.max_evals_per_start, initial_step: 0.7, f_tol: 1e-9 };
    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in starts {
        let (u, f) = nelder_mead(&objective, &compress(start), &lower, &upper, &opts);
        if best.as_ref().is_none_or(|(_, fb)| f < *fb) {
            best = Some((u, f));
        }
    }
    let (u, _) = best.expect("at least one restart");
    GpSurrogate::condition(inputs, targets, expand(&u), config.order, config.noise_floor)
}
