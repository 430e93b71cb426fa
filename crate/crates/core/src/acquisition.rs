//! Per-parameter Lower-Confidence-Bound acquisition.
//!
//! Each coordinate of the next simulation point is the argmin of
//! μ_j(θ_j) − β·σ_j(θ_j) over its own prior interval, found by a grid scan with
//! golden-section refinement and then perturbed by a small uniform jitter.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::GpSurrogate;
use crate::optim::{grid_minimize, linspace, refine_grid_minimum};
use crate::rng::{name_key, role, substream};
use crate::space::ParameterSpace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquisitionConfig {
    /// Exploration weight on the predictive standard deviation.
    pub beta: f64,
    /// Rounds drawn from the prior before acquisitions start.
    pub n_init: usize,
    /// Half-width of the uniform perturbation, relative to the support width.
    pub jitter_fraction: f64,
    pub grid_points: usize,
    pub refine_iters: usize,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self { beta: 2.0, n_init: 10, jitter_fraction: 0.05, grid_points: 256, refine_iters: 30 }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::Config(format!("acquisition.beta must be non-negative, got {}", self.beta)));
        }
        if self.n_init == 0 {
            return Err(Error::Config("acquisition.n_init must be positive".into()));
        }
        if !(0.0..0.5).contains(&self.jitter_fraction) {
            return Err(Error::Config(format!(
                "acquisition.jitter_fraction must lie in [0, 0.5), got {}",
                self.jitter_fraction
            )));
        }
        if self.grid_points < 16 {
            return Err(Error::Config(format!("acquisition.grid_points must be >= 16, got {}", self.grid_points)));
        }
        Ok(())
    }
}

/// LCB score μ − β·σ.
#[inline]
pub fn lcb(mean: f64, variance: f64, beta: f64) -> f64 {
    mean - beta * variance.max(0.0).sqrt()
}

/// Minimiser of the LCB surface of `gp` over `support`, before jitter.
pub fn lcb_argmin(gp: &GpSurrogate, support: (f64, f64), config: &AcquisitionConfig) -> f64 {
    let (lo, hi) = support;
    let score = |x: f64| {
        let (m, v) = gp.predict_unchecked(x);
        lcb(m, v, config.beta)
    };
    let grid = linspace(lo, hi, config.grid_points);
    match gp.predict_sorted(&grid) {
        Ok(pred) => {
            let values: Vec<f64> = pred.iter().map(|&(m, v)| lcb(m, v, config.beta)).collect();
            refine_grid_minimum(score, &grid, &values, config.refine_iters).0
        }
        Err(_) => grid_minimize(score, lo, hi, config.grid_points, config.refine_iters).0,
    }
}

/// Acquire the next value for one parameter.
pub fn acquire_marginal<R: Rng + ?Sized>(
    gp: &GpSurrogate,
    support: (f64, f64),
    config: &AcquisitionConfig,
    rng: &mut R,
) -> Result<f64> {
    let (lo, hi) = support;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidInput(format!("acquisition support must be a bounded interval, got [{lo}, {hi}]")));
    }
    let x = lcb_argmin(gp, support, config);
    let half_width = config.jitter_fraction * (hi - lo);
    let jitter = if half_width > 0.0 { rng.random_range(-half_width..half_width) } else { 0.0 };
    Ok((x + jitter).clamp(lo, hi))
}

/// Next parameter vector for simulation `round`.
///
/// Before `n_init` rounds (or while no surrogates exist) the vector is a prior
/// draw; afterwards each coordinate comes from [`acquire_marginal`] on its own
/// surrogate. Every coordinate draws from its own substream keyed by
/// (seed, round, parameter name), so coordinates are independent of the
/// parameter order.
pub fn acquire_round(
    gps: Option<&[GpSurrogate]>,
    space: &ParameterSpace,
    config: &AcquisitionConfig,
    round: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let stream = |j: usize, r: u64| substream(&[seed, round as u64, r, name_key(&space.names()[j])]);
    match gps {
        Some(gps) if round >= config.n_init => {
            if gps.len() != space.dim() {
                return Err(Error::DimensionMismatch { expected: space.dim(), got: gps.len() });
            }
            gps.iter()
                .enumerate()
                .map(|(j, gp)| acquire_marginal(gp, space.bounds(j), config, &mut stream(j, role::ACQUIRE)))
                .collect()
        }
        _ => Ok((0..space.dim()).map(|j| space.sample_coordinate(j, &mut stream(j, role::INIT))).collect()),
    }
}
