//! Multivariate Gaussian with identity covariance; the parameters are the
//! means, the summaries are the per-dimension sample means.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{DiscrepancyMap, DiscrepancyNorm, ForwardModel, SimulationError, SimulatorSpec};
use crate::error::Result;
use crate::rng::{role, substream};
use crate::space::ParameterSpace;

pub const DEFAULT_SAMPLES: usize = 100;
pub const DEFAULT_PRIOR: (f64, f64) = (-5.0, 5.0);

/// Per-dimension means of `n` draws from N(θ, I).
pub fn gaussian_simulate(theta: &[f64], n: usize, seed: u64) -> Vec<f64> {
    let mut rng = substream(&[seed]);
    let n = n.max(1);
    theta
        .iter()
        .map(|&mu| {
            let s: f64 = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).sum();
            mu + s / n as f64
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct GaussianModel {
    pub dim: usize,
    pub n_samples: usize,
}

impl ForwardModel for GaussianModel {
    fn summary_names(&self) -> Vec<String> {
        (0..self.dim).map(|j| format!("mean_{j}")).collect()
    }

    fn simulate_summaries(&self, theta: &[f64], seed: u64) -> Result<Vec<f64>, SimulationError> {
        if theta.len() != self.dim {
            return Err(SimulationError::InvalidParameters(format!("expected {} means, got {}", self.dim, theta.len())));
        }
        Ok(gaussian_simulate(theta, self.n_samples, seed))
    }
}

pub fn parameter_names(dim: usize) -> Vec<String> {
    (0..dim).map(|j| format!("mu_{j}")).collect()
}

/// Simulator set-up for inferring the mean vector given observed sample means.
pub fn gaussian_spec(
    observed_means: Vec<f64>,
    n_samples: usize,
    prior: (f64, f64),
    norm: DiscrepancyNorm,
) -> Result<SimulatorSpec> {
    let dim = observed_means.len();
    let space = ParameterSpace::uniform_box(parameter_names(dim), prior.0, prior.1)?;
    SimulatorSpec::new(
        space,
        Arc::new(GaussianModel { dim, n_samples }),
        DiscrepancyMap::identity(dim, norm),
        observed_means,
    )
}

/// A synthetic Gaussian problem: generating means, observed sample means, and
/// the exact posterior under the uniform prior.
#[derive(Debug, Clone)]
pub struct GaussianProblem {
    pub truth: Vec<f64>,
    pub observed_means: Vec<f64>,
    pub n_samples: usize,
    pub prior: (f64, f64),
}

impl GaussianProblem {
    /// Generating means are drawn from the central half of the prior box.
    pub fn synthetic(dim: usize, n_samples: usize, prior: (f64, f64), seed: u64) -> Self {
        let mut rng = substream(&[seed, role::TRUTH]);
        let (lo, hi) = prior;
        let quarter = 0.25 * (hi - lo);
        let truth: Vec<f64> = (0..dim).map(|_| rng.random_range(lo + quarter..hi - quarter)).collect();
        let observed_means = gaussian_simulate(&truth, n_samples, crate::rng::derive_seed(&[seed, role::OBSERVED]));
        Self { truth, observed_means, n_samples, prior }
    }

    pub fn spec(&self, norm: DiscrepancyNorm) -> Result<SimulatorSpec> {
        gaussian_spec(self.observed_means.clone(), self.n_samples, self.prior, norm)
    }

    /// Exact posterior for coordinate `j` on `grid`: N(x̄_j, 1/n) truncated to
    /// the prior box, normalised by the trapezoid rule.
    pub fn posterior_density(&self, j: usize, grid: &[f64]) -> Vec<f64> {
        analytic_posterior_density(grid, self.observed_means[j], self.n_samples)
    }
}

/// N(mean, 1/n) restricted to `grid` and normalised by the trapezoid rule.
pub fn analytic_posterior_density(grid: &[f64], sample_mean: f64, n_samples: usize) -> Vec<f64> {
    let prec = n_samples as f64;
    let raw: Vec<f64> = grid.iter().map(|&t| (-0.5 * prec * (t - sample_mean).powi(2)).exp()).collect();
    let z = crate::proxy::trapezoid(grid, &raw);
    raw.into_iter().map(|v| v / z).collect()
}
