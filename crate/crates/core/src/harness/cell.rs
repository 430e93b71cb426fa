use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ModelKind};
use crate::abc::{abc_estimates, accept, pool_size, simulate_pool};
use crate::engine::{run_split_bolfi_with_checkpoints, FitResult};
use crate::error::{Error, Result};
use crate::proxy::{symmetrized_kl, trapezoid, MarginalProxy};
use crate::simulators::daycare::{self, daycare_summaries, strains_for_dim, DaycareProblem};
use crate::simulators::gaussian::{analytic_posterior_density, GaussianProblem};
use crate::simulators::gvar::GvarProblem;
use crate::simulators::io::{read_snapshots_csv, read_summary_csv};
use crate::simulators::SimulatorSpec;

/// An inference problem for one (dimension, seed) cell.
#[derive(Debug, Clone)]
pub struct Problem {
    pub spec: SimulatorSpec,
    /// Generating parameters; absent for observed data read from a file.
    pub truth: Option<Vec<f64>>,
    /// Observed sample means and sample size, for the exact Gaussian posterior.
    pub gaussian_posterior: Option<(Vec<f64>, usize)>,
}

pub fn build_problem(config: &ExperimentConfig, dim: usize, seed: u64) -> Result<Problem> {
    match &config.data_file {
        Some(path) => problem_from_file(config, dim, path),
        None => synthetic_problem(config, dim, seed),
    }
}

fn daycare_strains(dim: usize) -> Result<usize> {
    strains_for_dim(dim).ok_or_else(|| Error::Config(format!("no daycare strain count gives dimension {dim}")))
}

fn synthetic_problem(config: &ExperimentConfig, dim: usize, seed: u64) -> Result<Problem> {
    match config.model {
        ModelKind::Gaussian => {
            let g = &config.gaussian;
            let p = GaussianProblem::synthetic(dim, g.n_samples, (g.prior[0], g.prior[1]), seed);
            Ok(Problem {
                spec: p.spec(config.norm)?,
                gaussian_posterior: Some((p.observed_means.clone(), p.n_samples)),
                truth: Some(p.truth),
            })
        }
        ModelKind::Gvar => {
            let v = &config.gvar;
            let p = GvarProblem::synthetic(dim - 1, v.t_steps, v.sigma2, v.dynamics, seed)?;
            Ok(Problem { spec: p.spec(v.noise_summary, config.norm)?, truth: Some(p.truth), gaussian_posterior: None })
        }
        ModelKind::Daycare => {
            let c = &config.daycare;
            let template = c.template(daycare_strains(dim)?);
            let p = DaycareProblem::synthetic(template, c.beta, c.lambda, &c.pairs(), c.competition, seed)?;
            Ok(Problem { spec: p.spec(config.norm, c.aggregation)?, truth: Some(p.truth), gaussian_posterior: None })
        }
    }
}

fn problem_from_file(config: &ExperimentConfig, dim: usize, path: &Path) -> Result<Problem> {
    // Build a synthetic problem only to obtain the simulator and summary names.
    let template = synthetic_problem(config, dim, 0)?;
    let names = template.spec.summary_names();
    let observed = if config.model == ModelKind::Daycare && is_snapshot_file(path)? {
        let (strains, snapshots) = read_snapshots_csv(path)?;
        let expected = daycare_strains(dim)?;
        if strains.len() != expected {
            return Err(Error::InvalidInput(format!(
                "{} has {} strains but dimension {dim} needs {expected}",
                path.display(),
                strains.len()
            )));
        }
        daycare_summaries(&snapshots).to_vec()
    } else {
        read_summary_csv(path, &names)?
    };
    let spec = template.spec.with_observed(observed.clone())?;
    let gaussian_posterior = (config.model == ModelKind::Gaussian).then_some((observed, config.gaussian.n_samples));
    Ok(Problem { spec, truth: None, gaussian_posterior })
}

fn is_snapshot_file(path: &Path) -> Result<bool> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.headers()?.get(0) == Some("snapshot"))
}

/// Metrics of one fit at one tempering weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub n_acq: usize,
    pub w: f64,
    pub sim_calls: usize,
    /// RMSE of the proxy means against the generating parameters.
    pub rmse_gen: Option<f64>,
    /// RMSE of the proxy means against the exact posterior means (Gaussian only).
    pub rmse_post: Option<f64>,
    /// Mean proxy standard deviation.
    pub sd: f64,
    /// Mean symmetrized KL divergence to the exact posterior (Gaussian only).
    pub skl: Option<f64>,
}

/// Fits at every budget plus their metrics at every weight, budget-major.
#[derive(Debug, Clone)]
pub struct CellOutput {
    pub fits: Vec<FitResult>,
    pub metrics: Vec<CellMetrics>,
}

pub fn rmse(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().max(1) as f64;
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / n).sqrt()
}

/// Exact Gaussian posterior densities on each proxy's grid.
pub fn gaussian_posteriors(proxies: &[MarginalProxy], observed_means: &[f64], n_samples: usize) -> Vec<Vec<f64>> {
    proxies.iter().zip(observed_means).map(|(p, &m)| analytic_posterior_density(&p.grid, m, n_samples)).collect()
}

pub fn evaluate_fit(problem: &Problem, fit: &FitResult, w: f64, grid_points: usize) -> Result<(CellMetrics, Vec<MarginalProxy>)> {
    let proxies = fit.proxies(w, grid_points)?;
    let moments: Vec<_> = proxies.iter().map(MarginalProxy::moments).collect();
    let means: Vec<f64> = moments.iter().map(|m| m.mean).collect();
    let p = proxies.len().max(1) as f64;
    let (rmse_post, skl) = match &problem.gaussian_posterior {
        Some((obs, n)) => {
            let exact = gaussian_posteriors(&proxies, obs, *n);
            let exact_means: Vec<f64> = proxies
                .iter()
                .zip(&exact)
                .map(|(px, d)| {
                    let xd: Vec<f64> = px.grid.iter().zip(d).map(|(x, v)| x * v).collect();
                    trapezoid(&px.grid, &xd)
                })
                .collect();
            let mut kl = 0.0;
            for (px, d) in proxies.iter().zip(&exact) {
                kl += symmetrized_kl(&px.grid, &px.density, d)?;
            }
            (Some(rmse(&means, &exact_means)), Some(kl / p))
        }
        None => (None, None),
    };
    let metrics = CellMetrics {
        n_acq: fit.n_acq,
        w,
        sim_calls: fit.diagnostics.simulator_calls,
        rmse_gen: problem.truth.as_ref().map(|t| rmse(&means, t)),
        rmse_post,
        sd: moments.iter().map(|m| m.sd).sum::<f64>() / p,
        skl,
    };
    Ok((metrics, proxies))
}

/// Runs Split-BOLFI once with checkpoints at every configured budget and
/// evaluates each fit at every configured weight.
pub fn evaluate_cell(config: &ExperimentConfig, dim: usize, seed: u64) -> Result<CellOutput> {
    let problem = build_problem(config, dim, seed)?;
    evaluate_problem(config, &problem, seed)
}

pub fn evaluate_problem(config: &ExperimentConfig, problem: &Problem, seed: u64) -> Result<CellOutput> {
    let fits = run_split_bolfi_with_checkpoints(&problem.spec, &config.budgets(), &config.engine_config(), seed)?;
    let mut metrics = Vec::with_capacity(fits.len() * config.w_values.len());
    for fit in &fits {
        for &w in &config.w_values {
            metrics.push(evaluate_fit(problem, fit, w, config.grid_points)?.0);
        }
    }
    Ok(CellOutput { fits, metrics })
}

/// Marginal ABC metrics for one (q, n_samples) setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbcMetrics {
    pub q: f64,
    pub n_samples: usize,
    /// Prior draws simulated, ceil(n_samples / q).
    pub budget: usize,
    pub rmse_gen: Option<f64>,
    /// Mean accepted-sample sd; absent when a single sample is accepted.
    pub sd: Option<f64>,
}

/// All (q, n_samples) settings of the config, sharing one simulated pool.
pub fn evaluate_abc_cell(config: &ExperimentConfig, dim: usize, seed: u64) -> Result<Vec<AbcMetrics>> {
    let abc = config.abc.as_ref().ok_or_else(|| Error::Config("the `abc` section is missing".into()))?;
    let problem = build_problem(config, dim, seed)?;
    let mut settings = Vec::new();
    for &q in &abc.q {
        for &n in &abc.n_samples {
            settings.push((q, n, pool_size(q, n)?));
        }
    }
    let largest = settings.iter().map(|s| s.2).max().unwrap_or(0);
    let pool = simulate_pool(&problem.spec, largest, seed);
    let names = problem.spec.space().names().to_vec();
    settings
        .into_iter()
        .map(|(q, n, size)| {
            let run = accept(names.clone(), pool.prefix(size), q, n)?;
            let est = abc_estimates(&run);
            let means: Vec<f64> = est.iter().map(|e| e.mean).collect();
            let sds: Option<Vec<f64>> = est.iter().map(|e| e.sd).collect();
            Ok(AbcMetrics {
                q,
                n_samples: n,
                budget: run.budget(),
                rmse_gen: problem.truth.as_ref().map(|t| rmse(&means, t)),
                sd: sds.map(|s| s.iter().sum::<f64>() / s.len().max(1) as f64),
            })
        })
        .collect()
}

/// One simulated data set at `theta`, or at the synthetic truth of `seed`.
/// With the truth it reproduces the observed data of that seed exactly.
pub fn simulate_observed(config: &ExperimentConfig, dim: usize, seed: u64, theta: Option<&[f64]>) -> Result<SimulatedData> {
    let problem = synthetic_problem(config, dim, seed)?;
    let theta = match theta {
        Some(t) => t.to_vec(),
        None => problem.truth.clone().expect("synthetic problems carry their truth"),
    };
    if theta.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: theta.len() });
    }
    let sim_seed = crate::rng::derive_seed(&[seed, crate::rng::role::OBSERVED]);
    let names = problem.spec.summary_names();
    let (summaries, snapshots) = if config.model == ModelKind::Daycare {
        let sim = daycare::DaycareSimulator::new(config.daycare.template(daycare_strains(dim)?));
        let out = daycare::daycare_simulate(&sim.model(&theta)?, sim_seed)?;
        (out.summaries.to_vec(), Some(out.snapshots))
    } else {
        (problem.spec.model().simulate_summaries(&theta, sim_seed)?, None)
    };
    let parameter_names = problem.spec.space().names().to_vec();
    Ok(SimulatedData { parameter_names, theta, summary_names: names, summaries, snapshots })
}

#[derive(Debug, Clone)]
pub struct SimulatedData {
    pub parameter_names: Vec<String>,
    pub theta: Vec<f64>,
    pub summary_names: Vec<String>,
    pub summaries: Vec<f64>,
    pub snapshots: Option<Vec<daycare::ColonizationMatrix>>,
}
