//! Sparse graphical vector autoregression.
//!
//! Every variable i is coupled to exactly one partner k(i) through the
//! transition coefficient Π_{i,k(i)}, and the diagonal of Π is −1. Summaries
//! are the lag-1 Pearson cross-correlations corr(X_i(t+1), X_{k(i)}(t)) and the
//! per-variable sample variances.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{DiscrepancyMap, DiscrepancyNorm, ForwardModel, SimulationError, SimulatorSpec};
use crate::error::{Error, Result};
use crate::rng::{role, substream};
use crate::space::ParameterSpace;

pub const DEFAULT_STEPS: usize = 500;
pub const DEFAULT_SIGMA2: f64 = 0.1;
pub const COUPLING_PRIOR: (f64, f64) = (-1.0, 1.0);
pub const SIGMA2_PRIOR: (f64, f64) = (0.0, 1.0);
const OVERFLOW_LIMIT: f64 = 1e150;
const STABLE_RADIUS: f64 = 0.95;

/// How Π enters the update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GvarDynamics {
    /// X_{t+1} = Π X_t + ε. With the −1 diagonal the spectral radius exceeds
    /// 1 for most couplings and the trajectory blows up.
    AsWritten,
    /// Π rescaled to spectral radius 0.95 whenever it exceeds that.
    Stabilized,
    /// Error-correction form X_{t+1} − X_t = Π X_t + ε, i.e. X_{t+1} = (I + Π) X_t + ε.
    /// The −1 diagonal cancels and |Π_{i,k}| ≤ 1 keeps the spectral radius at most 1.
    #[default]
    ErrorCorrection,
}

/// Which summaries feed the noise-variance discrepancy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseSummary {
    /// Sum of the per-variable sample variances.
    #[default]
    VarianceSum,
    /// Sum of the lag-1 cross-correlations. Scale-free, so it carries no
    /// information about σ².
    LaggedCorrelationSum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GvarModel {
    pub n_vars: usize,
    pub partner: Vec<usize>,
    pub pi_offdiag: Vec<f64>,
    pub sigma2: f64,
    pub t_steps: usize,
    pub dynamics: GvarDynamics,
}

/// Partner map i → i+1, last → first.
pub fn ring_partners(n_vars: usize) -> Vec<usize> {
    (0..n_vars).map(|i| (i + 1) % n_vars).collect()
}

impl GvarModel {
    pub fn new(pi_offdiag: Vec<f64>, sigma2: f64, t_steps: usize, dynamics: GvarDynamics) -> Result<Self> {
        let n_vars = pi_offdiag.len();
        let model = Self { n_vars, partner: ring_partners(n_vars), pi_offdiag, sigma2, t_steps, dynamics };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_vars < 2 {
            return Err(Error::InvalidInput("GVAR needs at least two variables".into()));
        }
        if self.partner.len() != self.n_vars || self.pi_offdiag.len() != self.n_vars {
            return Err(Error::DimensionMismatch { expected: self.n_vars, got: self.partner.len().min(self.pi_offdiag.len()) });
        }
        for (i, (&k, &c)) in self.partner.iter().zip(&self.pi_offdiag).enumerate() {
            if k >= self.n_vars || k == i {
                return Err(Error::InvalidInput(format!("variable {i} needs an off-diagonal partner, got {k}")));
            }
            // The prior box is closed, so acquisitions may sit exactly on ±1.
            if !(c.is_finite() && c.abs() <= 1.0) {
                return Err(Error::InvalidInput(format!("coupling {i} must satisfy |c| <= 1, got {c}")));
            }
        }
        if !(self.sigma2.is_finite() && self.sigma2 >= 0.0) {
            return Err(Error::InvalidInput(format!("sigma2 must be non-negative, got {}", self.sigma2)));
        }
        if self.t_steps < 2 {
            return Err(Error::InvalidInput("GVAR needs at least two time steps".into()));
        }
        Ok(())
    }

    /// Π with −1 on the diagonal and one coupling per row.
    pub fn transition_matrix(&self) -> DMatrix<f64> {
        let mut pi = DMatrix::from_diagonal_element(self.n_vars, self.n_vars, -1.0);
        for (i, (&k, &c)) in self.partner.iter().zip(&self.pi_offdiag).enumerate() {
            pi[(i, k)] = c;
        }
        pi
    }

    /// (diagonal entry, per-row coupling) of the matrix actually applied each step.
    fn update_coefficients(&self) -> (f64, Vec<f64>) {
        match self.dynamics {
            GvarDynamics::AsWritten => (-1.0, self.pi_offdiag.clone()),
            GvarDynamics::ErrorCorrection => (0.0, self.pi_offdiag.clone()),
            GvarDynamics::Stabilized => {
                let radius = spectral_radius(&self.transition_matrix());
                let s = if radius > STABLE_RADIUS { STABLE_RADIUS / radius } else { 1.0 };
                (-s, self.pi_offdiag.iter().map(|c| s * c).collect())
            }
        }
    }
}

pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GvarSummaries {
    /// corr(X_i(t+1), X_{k(i)}(t)) for each variable i.
    pub lag_correlations: Vec<f64>,
    pub variances: Vec<f64>,
}

/// Sample Pearson correlation; 0 when either side has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n < 2 {
        return 0.0;
    }
    let ma = a[..n].iter().sum::<f64>() / n as f64;
    let mb = b[..n].iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (da, db) = (a[i] - ma, b[i] - mb);
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        0.0
    } else {
        (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)
    }
}

fn sample_variance(a: &[f64]) -> f64 {
    let n = a.len();
    if n < 2 {
        return 0.0;
    }
    let m = a.iter().sum::<f64>() / n as f64;
    a.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64
}

/// Simulate `t_steps` updates from X_0 = 0 and return the trajectory as
/// `series[i][t]`, t = 0..=t_steps.
pub fn gvar_trajectory(model: &GvarModel, seed: u64) -> Result<Vec<Vec<f64>>, SimulationError> {
    let n = model.n_vars;
    let (diag, coupling) = model.update_coefficients();
    let noise_sd = model.sigma2.sqrt();
    let mut rng = substream(&[seed]);
    let mut series = vec![vec![0.0; model.t_steps + 1]; n];
    for t in 0..model.t_steps {
        for i in 0..n {
            let eps: f64 = rng.sample(StandardNormal);
            let x = diag * series[i][t] + coupling[i] * series[model.partner[i]][t] + noise_sd * eps;
            if !x.is_finite() || x.abs() > OVERFLOW_LIMIT {
                return Err(SimulationError::NonFinite { step: t + 1 });
            }
            series[i][t + 1] = x;
        }
    }
    Ok(series)
}

pub fn gvar_simulate(model: &GvarModel, seed: u64) -> Result<GvarSummaries, SimulationError> {
    let series = gvar_trajectory(model, seed)?;
    let t = model.t_steps;
    let lag_correlations = (0..model.n_vars)
        .map(|i| pearson(&series[i][1..=t], &series[model.partner[i]][..t]))
        .collect();
    let variances = series.iter().map(|s| sample_variance(&s[1..])).collect();
    Ok(GvarSummaries { lag_correlations, variances })
}

/// θ = (Π_{0,k(0)}, …, Π_{n−1,k(n−1)}, σ²).
#[derive(Debug, Clone)]
pub struct GvarSimulator {
    pub n_vars: usize,
    pub t_steps: usize,
    pub dynamics: GvarDynamics,
}

impl GvarSimulator {
    fn model(&self, theta: &[f64]) -> Result<GvarModel, SimulationError> {
        if theta.len() != self.n_vars + 1 {
            return Err(SimulationError::InvalidParameters(format!(
                "expected {} parameters, got {}",
                self.n_vars + 1,
                theta.len()
            )));
        }
        let model = GvarModel {
            n_vars: self.n_vars,
            partner: ring_partners(self.n_vars),
            pi_offdiag: theta[..self.n_vars].to_vec(),
            sigma2: theta[self.n_vars],
            t_steps: self.t_steps,
            dynamics: self.dynamics,
        };
        model.validate().map_err(|e| SimulationError::InvalidParameters(e.to_string()))?;
        Ok(model)
    }
}

impl ForwardModel for GvarSimulator {
    fn summary_names(&self) -> Vec<String> {
        let partners = ring_partners(self.n_vars);
        (0..self.n_vars)
            .map(|i| format!("lagcorr_{i}_{}", partners[i]))
            .chain((0..self.n_vars).map(|i| format!("var_{i}")))
            .collect()
    }

    fn simulate_summaries(&self, theta: &[f64], seed: u64) -> Result<Vec<f64>, SimulationError> {
        let s = gvar_simulate(&self.model(theta)?, seed)?;
        Ok(s.lag_correlations.into_iter().chain(s.variances).collect())
    }
}

pub fn parameter_names(n_vars: usize) -> Vec<String> {
    let partners = ring_partners(n_vars);
    (0..n_vars).map(|i| format!("pi_{i}_{}", partners[i])).chain(std::iter::once("sigma2".to_string())).collect()
}

pub fn gvar_space(n_vars: usize) -> Result<ParameterSpace> {
    let p = n_vars + 1;
    let mut lower = vec![COUPLING_PRIOR.0; p];
    let mut upper = vec![COUPLING_PRIOR.1; p];
    lower[n_vars] = SIGMA2_PRIOR.0;
    upper[n_vars] = SIGMA2_PRIOR.1;
    ParameterSpace::new(parameter_names(n_vars), lower, upper)
}

pub fn gvar_discrepancy_map(n_vars: usize, noise_summary: NoiseSummary, norm: DiscrepancyNorm) -> DiscrepancyMap {
    let sigma_group: Vec<usize> = match noise_summary {
        NoiseSummary::VarianceSum => (n_vars..2 * n_vars).collect(),
        NoiseSummary::LaggedCorrelationSum => (0..n_vars).collect(),
    };
    let groups = (0..n_vars).map(|i| vec![i]).chain(std::iter::once(sigma_group)).collect();
    DiscrepancyMap::new(groups, norm)
}

/// Synthetic GVAR problem with couplings drawn from U(−1, 1).
#[derive(Debug, Clone)]
pub struct GvarProblem {
    pub simulator: GvarSimulator,
    pub truth: Vec<f64>,
    pub observed: Vec<f64>,
}

impl GvarProblem {
    pub fn synthetic(n_vars: usize, t_steps: usize, sigma2: f64, dynamics: GvarDynamics, seed: u64) -> Result<Self> {
        let mut rng = substream(&[seed, role::TRUTH]);
        let mut truth: Vec<f64> = (0..n_vars).map(|_| rng.random_range(COUPLING_PRIOR.0..COUPLING_PRIOR.1)).collect();
        truth.push(sigma2);
        let simulator = GvarSimulator { n_vars, t_steps, dynamics };
        let observed = simulator.simulate_summaries(&truth, crate::rng::derive_seed(&[seed, role::OBSERVED]))?;
        Ok(Self { simulator, truth, observed })
    }

    pub fn spec(&self, noise_summary: NoiseSummary, norm: DiscrepancyNorm) -> Result<SimulatorSpec> {
        let n = self.simulator.n_vars;
        SimulatorSpec::new(
            gvar_space(n)?,
            Arc::new(self.simulator.clone()),
            gvar_discrepancy_map(n, noise_summary, norm),
            self.observed.clone(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transition_matrix_structure() {
        let m = GvarModel::new(vec![0.5, -0.3, 0.9], 0.1, 10, GvarDynamics::AsWritten).unwrap();
        let pi = m.transition_matrix();
        for i in 0..3 {
            assert_eq!(pi[(i, i)], -1.0);
            let off: Vec<f64> = (0..3).filter(|&k| k != i).map(|k| pi[(i, k)]).filter(|v| *v != 0.0).collect();
            assert_eq!(off.len(), 1);
            assert!(off[0].abs() <= 1.0);
        }
    }

    #[test]
    fn rejects_invalid_models() {
        assert!(GvarModel::new(vec![1.5, 0.0], 0.1, 10, GvarDynamics::AsWritten).is_err());
        assert!(GvarModel::new(vec![1.0, -1.0], 0.1, 10, GvarDynamics::ErrorCorrection).is_ok());
        assert!(GvarModel::new(vec![0.5], 0.1, 10, GvarDynamics::AsWritten).is_err());
        assert!(GvarModel::new(vec![0.5, 0.1], -0.1, 10, GvarDynamics::AsWritten).is_err());
        let mut m = GvarModel::new(vec![0.5, 0.1, 0.2], 0.1, 10, GvarDynamics::AsWritten).unwrap();
        m.partner[1] = 1;
        assert!(m.validate().is_err());
    }

    #[test]
    fn zero_noise_gives_zero_trajectory_and_zero_correlations() {
        let m = GvarModel::new(vec![0.5, -0.2, 0.3], 0.0, 50, GvarDynamics::AsWritten).unwrap();
        let s = gvar_simulate(&m, 1).unwrap();
        assert!(s.lag_correlations.iter().all(|&c| c == 0.0));
        assert!(s.variances.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn uncoupled_as_written_autocorrelation_near_minus_one() {
        // X_{t+1} = −X_t + ε is a sign-alternating random walk; its lag-1
        // autocorrelation over a long run approaches −1. Monte-Carlo oracle:
        // average the empirical statistic over independent long runs.
        let t = 5000;
        let mut mc = 0.0;
        let reps = 20;
        for r in 0..reps {
            let m = GvarModel {
                n_vars: 2,
                partner: vec![1, 0],
                pi_offdiag: vec![0.0, 0.0],
                sigma2: 0.1,
                t_steps: t,
                dynamics: GvarDynamics::AsWritten,
            };
            let series = gvar_trajectory(&m, 100 + r).unwrap();
            mc += pearson(&series[0][1..], &series[0][..t]) / reps as f64;
        }
        assert!((mc + 1.0).abs() < 0.05, "{mc}");
    }

    #[test]
    fn error_correction_cross_correlation_matches_stationary_value() {
        // X_i(t+1) = c_i X_k(t) + ε with a two-cycle: corr = c_i·sqrt(V_k/V_i),
        // V_0 = σ²(1 + c_0²)/(1 − c_0²c_1²), V_1 = σ²(1 + c_1²)/(1 − c_0²c_1²).
        let (c0, c1) = (0.6, -0.4);
        let m = GvarModel::new(vec![c0, c1], 0.1, 200_000, GvarDynamics::ErrorCorrection).unwrap();
        let s = gvar_simulate(&m, 3).unwrap();
        let v0 = 1.0 + c0 * c0;
        let v1 = 1.0 + c1 * c1;
        let expected0 = c0 * (v1 / v0).sqrt();
        assert!((s.lag_correlations[0] - expected0).abs() < 0.01, "{} vs {expected0}", s.lag_correlations[0]);
        let denom = 1.0 - c0 * c0 * c1 * c1;
        assert!((s.variances[0] - 0.1 * v0 / denom).abs() < 0.005);
    }

    #[test]
    fn as_written_dynamics_explode() {
        // Diagonal −1 plus a coupling ring puts eigenvalues outside the unit
        // circle; over 500 steps the sample variance grows by many orders.
        let m = GvarModel::new(vec![0.5, -0.5, 0.5, 0.5, -0.5], 0.1, 500, GvarDynamics::AsWritten).unwrap();
        assert!(spectral_radius(&m.transition_matrix()) > 1.4);
        match gvar_simulate(&m, 8) {
            Ok(s) => assert!(s.variances.iter().all(|v| *v > 1e40), "{:?}", s.variances),
            Err(SimulationError::NonFinite { .. }) => {}
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn stabilized_mode_is_stationary() {
        let m = GvarModel::new(vec![0.9, 0.8, -0.7, 0.95], 0.1, 20_000, GvarDynamics::Stabilized).unwrap();
        let s = gvar_simulate(&m, 4).unwrap();
        assert!(s.variances.iter().all(|v| v.is_finite() && *v < 10.0));
    }

    #[test]
    fn same_seed_bit_identical() {
        let sim = GvarSimulator { n_vars: 4, t_steps: 500, dynamics: GvarDynamics::ErrorCorrection };
        let theta = [0.2, -0.5, 0.7, 0.1, 0.1];
        assert_eq!(sim.simulate_summaries(&theta, 9).unwrap(), sim.simulate_summaries(&theta, 9).unwrap());
    }

    #[test]
    fn cross_correlation_responds_monotonically_to_coupling() {
        let sim = GvarSimulator { n_vars: 3, t_steps: 500, dynamics: GvarDynamics::ErrorCorrection };
        let reps = 30;
        let mean_corr = |c: f64| {
            (0..reps).map(|r| sim.simulate_summaries(&[c, 0.3, -0.2, 0.1], r).unwrap()[0]).sum::<f64>() / reps as f64
        };
        let (lo, mid, hi) = (mean_corr(-0.8), mean_corr(0.0), mean_corr(0.8));
        assert!(lo < mid && mid < hi, "{lo} {mid} {hi}");
    }

    #[test]
    fn paper_scale_problem_builds() {
        let p = GvarProblem::synthetic(5, DEFAULT_STEPS, DEFAULT_SIGMA2, GvarDynamics::ErrorCorrection, 1).unwrap();
        assert_eq!(p.truth.len(), 6);
        assert_eq!(p.truth[5], 0.1);
        assert!(p.truth[..5].iter().all(|c| c.abs() < 1.0));
        let spec = p.spec(NoiseSummary::VarianceSum, DiscrepancyNorm::Absolute).unwrap();
        assert_eq!(spec.space().dim(), 6);
        assert_eq!(spec.observed().len(), 10);
    }
}
