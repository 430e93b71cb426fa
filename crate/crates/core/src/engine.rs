//! The Split-BOLFI loop.
//!
//! One simulation per round; its per-parameter discrepancies extend all p
//! training sets at once. Each parameter has its own 1-D surrogate, refitted
//! by MAP on a fixed cadence and re-conditioned with the current
//! hyperparameters in between.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acquisition::{acquire_round, AcquisitionConfig};
use crate::error::{Error, Result};
use crate::gp::{fit_hyperparams, GpSurrogate, Hyperparams, KernelConfig};
use crate::optim::grid_minimize;
use crate::proxy::{build_proxy, tempering_scale, MarginalProxy, TemperingScale};
use crate::rng::{derive_seed, name_key, role, substream};
use crate::simulators::SimulatorSpec;
use crate::space::ParameterSpace;

/// Grid used by [`minimize_posterior_mean`].
pub const MEAN_GRID_POINTS: usize = 256;
pub const MEAN_REFINE_ITERS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitBolfiConfig {
    pub kernel: KernelConfig,
    pub acquisition: AcquisitionConfig,
    /// Rounds between full MAP refits once acquisitions have started.
    pub refit_every: usize,
}

impl Default for SplitBolfiConfig {
    fn default() -> Self {
        Self { kernel: KernelConfig::default(), acquisition: AcquisitionConfig::default(), refit_every: 5 }
    }
}

impl SplitBolfiConfig {
    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        self.acquisition.validate()?;
        if self.refit_every == 0 {
            return Err(Error::Config("refit_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// Every simulation made so far: the shared training set of all surrogates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvaluationLog {
    pub params: Vec<Vec<f64>>,
    pub discrepancies: Vec<Vec<f64>>,
    pub seeds: Vec<u64>,
    /// Round that produced each row; skipped rounds leave gaps.
    pub rounds: Vec<usize>,
}

impl EvaluationLog {
    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn push(&mut self, theta: Vec<f64>, d: Vec<f64>, seed: u64, round: usize) {
        self.params.push(theta);
        self.discrepancies.push(d);
        self.seeds.push(seed);
        self.rounds.push(round);
    }

    /// (θ_j, d_j) training pairs for parameter j.
    pub fn column(&self, j: usize) -> (Vec<f64>, Vec<f64>) {
        (self.params.iter().map(|r| r[j]).collect(), self.discrepancies.iter().map(|r| r[j]).collect())
    }

    /// Elementwise minimum of the observed discrepancies.
    pub fn d_obs_min(&self) -> Vec<f64> {
        let p = self.discrepancies.first().map_or(0, Vec::len);
        (0..p)
            .map(|j| self.discrepancies.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunDiagnostics {
    /// Simulator invocations including retries.
    pub simulator_calls: usize,
    pub retries: usize,
    pub skipped_rounds: usize,
    pub map_refits: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub space: ParameterSpace,
    pub config: SplitBolfiConfig,
    pub seed: u64,
    pub n_acq: usize,
    pub surrogates: Vec<GpSurrogate>,
    /// Minimiser of each surrogate mean over its support.
    pub argmin: Vec<f64>,
    pub d_min: Vec<f64>,
    pub d_obs_min: Vec<f64>,
    pub log: EvaluationLog,
    pub diagnostics: RunDiagnostics,
}

impl FitResult {
    pub fn tempering(&self) -> Result<Vec<TemperingScale>> {
        self.d_min.iter().zip(&self.d_obs_min).map(|(&a, &b)| tempering_scale(a, b)).collect()
    }

    /// Marginal proxies for every parameter at tempering weight `w`.
    pub fn proxies(&self, w: f64, grid_points: usize) -> Result<Vec<MarginalProxy>> {
        let scales = self.tempering()?;
        (0..self.space.dim())
            .map(|j| build_proxy(&self.surrogates[j], self.space.bounds(j), w, scales[j].value, grid_points))
            .collect()
    }

    pub fn proxy(&self, j: usize, w: f64, grid_points: usize) -> Result<MarginalProxy> {
        let scale = tempering_scale(self.d_min[j], self.d_obs_min[j])?;
        build_proxy(&self.surrogates[j], self.space.bounds(j), w, scale.value, grid_points)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Grid-plus-golden-section minimum of the predictive mean over `support`.
pub fn minimize_posterior_mean(gp: &GpSurrogate, support: (f64, f64)) -> (f64, f64) {
    let (lo, hi) = support;
    grid_minimize(|x| gp.predict_mean_unchecked(x), lo, hi, MEAN_GRID_POINTS, MEAN_REFINE_ITERS)
}

/// Run `n_acq` simulation rounds and fit the final surrogates.
pub fn run_split_bolfi(spec: &SimulatorSpec, n_acq: usize, config: &SplitBolfiConfig, seed: u64) -> Result<FitResult> {
    Ok(run_split_bolfi_with_checkpoints(spec, &[n_acq], config, seed)?.pop().expect("one checkpoint"))
}

/// One run that reports a [`FitResult`] after each budget in `budgets`.
///
/// Checkpoint fits never feed back into the loop, so the result at budget n
/// equals that of a standalone run with `n_acq = n`.
pub fn run_split_bolfi_with_checkpoints(
    spec: &SimulatorSpec,
    budgets: &[usize],
    config: &SplitBolfiConfig,
    seed: u64,
) -> Result<Vec<FitResult>> {
    config.validate()?;
    let n_init = config.acquisition.n_init;
    if budgets.is_empty() || budgets.iter().any(|&b| b < n_init) {
        return Err(Error::InvalidInput(format!("every budget must be at least n_init = {n_init}, got {budgets:?}")));
    }
    if budgets.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput(format!("budgets must be strictly increasing, got {budgets:?}")));
    }
    let space = spec.space();
    let p = space.dim();
    let n_total = *budgets.last().expect("non-empty");

    let mut log = EvaluationLog::default();
    let mut diag = RunDiagnostics::default();
    let mut gps: Option<Vec<GpSurrogate>> = None;
    let mut results = Vec::with_capacity(budgets.len());

    for round in 0..n_total {
        let theta = acquire_round(gps.as_deref(), space, &config.acquisition, round, seed)?;
        simulate_round(spec, &theta, seed, round, &mut log, &mut diag);

        let t = round + 1;
        if t < n_init {
            continue;
        }
        let scheduled = (t - n_init).is_multiple_of(config.refit_every);
        let is_checkpoint = budgets.contains(&t);
        if t < n_total && (scheduled || gps.is_none()) {
            gps = Some(map_fit(&log, space, &config.kernel, seed, t, gps.as_deref())?);
            diag.map_refits += p;
        } else if t < n_total {
            let current = gps.as_deref().expect("fitted after n_init");
            gps = Some(recondition(&log, current, &config.kernel)?);
        }
        if is_checkpoint {
            let fitted = if scheduled && t < n_total {
                gps.clone().expect("just refitted")
            } else {
                diag.map_refits += p;
                map_fit(&log, space, &config.kernel, seed, t, gps.as_deref())?
            };
            results.push(finish(space, config, seed, t, fitted, &log, diag)?);
        }
    }
    Ok(results)
}

fn simulate_round(spec: &SimulatorSpec, theta: &[f64], seed: u64, round: usize, log: &mut EvaluationLog, diag: &mut RunDiagnostics) {
    let first = derive_seed(&[seed, round as u64, role::SIMULATE]);
    diag.simulator_calls += 1;
    match spec.discrepancies(theta, first) {
        Ok(d) => log.push(theta.to_vec(), d, first, round),
        Err(e) => {
            diag.retries += 1;
            diag.simulator_calls += 1;
            let retry = derive_seed(&[seed, round as u64, role::RETRY]);
            match spec.discrepancies(theta, retry) {
                Ok(d) => log.push(theta.to_vec(), d, retry, round),
                Err(e2) => {
                    diag.skipped_rounds += 1;
                    warn!("round {round} skipped after retry: {e}; {e2}");
                }
            }
        }
    }
}

fn map_fit(
    log: &EvaluationLog,
    space: &ParameterSpace,
    kernel: &KernelConfig,
    seed: u64,
    t: usize,
    previous: Option<&[GpSurrogate]>,
) -> Result<Vec<GpSurrogate>> {
    (0..space.dim())
        .into_par_iter()
        .map(|j| {
            let (x, y) = log.column(j);
            let mut rng = substream(&[seed, t as u64, role::FIT, name_key(&space.names()[j])]);
            let warm: Option<Hyperparams> = previous.map(|g| g[j].hyperparams());
            fit_hyperparams(&x, &y, kernel, &mut rng, warm)
        })
        .collect()
}

fn recondition(log: &EvaluationLog, current: &[GpSurrogate], kernel: &KernelConfig) -> Result<Vec<GpSurrogate>> {
    current
        .par_iter()
        .enumerate()
        .map(|(j, gp)| {
            let (x, y) = log.column(j);
            GpSurrogate::condition(&x, &y, gp.hyperparams(), kernel.order, kernel.noise_floor)
        })
        .collect()
}

fn finish(
    space: &ParameterSpace,
    config: &SplitBolfiConfig,
    seed: u64,
    n_acq: usize,
    surrogates: Vec<GpSurrogate>,
    log: &EvaluationLog,
    diagnostics: RunDiagnostics,
) -> Result<FitResult> {
    if log.is_empty() {
        return Err(Error::InvalidInput(format!("all {n_acq} simulation rounds failed")));
    }
    let (argmin, d_min): (Vec<f64>, Vec<f64>) = surrogates
        .iter()
        .enumerate()
        .map(|(j, gp)| minimize_posterior_mean(gp, space.bounds(j)))
        .unzip();
    Ok(FitResult {
        space: space.clone(),
        config: config.clone(),
        seed,
        n_acq,
        surrogates,
        argmin,
        d_min,
        d_obs_min: log.d_obs_min(),
        log: log.clone(),
        diagnostics,
    })
}
