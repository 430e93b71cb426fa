//! Multi-strain colonization dynamics in a closed daycare population.
//!
//! Each child carries any subset of the strains. An uncolonized child acquires
//! strain s at rate β·E_s + Λ·P_s, where E_s is the fraction of the other
//! children carrying s and P_s the background prevalence. A child already
//! carrying strains acquires s at that rate times 2Φ(−Σ_j θ_sj I_ij), so the
//! symmetric matrix θ suppresses co-colonization. Carriage clears at rate γ = 1.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::{DiscrepancyMap, DiscrepancyNorm, ForwardModel, GroupAggregation, SimulationError, SimulatorSpec};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, role, substream};
use crate::space::ParameterSpace;

/// Additive smoothing in the co-prevalence statistic.
pub const COPREVALENCE_SMOOTHING: f64 = 0.01;
pub const RATE_PRIOR: (f64, f64) = (0.0, 11.0);
pub const COMPETITION_PRIOR: (f64, f64) = (0.0, 3.0);
pub const DEFAULT_CHILDREN: usize = 47;
pub const DEFAULT_OBSERVATIONS: usize = 11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// Fixed-step Bernoulli updates with probability rate·dt.
    #[default]
    TauLeap,
    /// Exact event-driven simulation; slow, kept as a reference.
    Gillespie,
}

/// 2Φ(−load): the acquisition multiplier for a child carrying strains with
/// summed competition `load` against the incoming strain.
#[inline]
pub fn competition_factor(load: f64) -> f64 {
    erfc(load / std::f64::consts::SQRT_2)
}

/// Binary child × strain carriage matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColonizationMatrix {
    n_children: usize,
    n_strains: usize,
    cells: Vec<bool>,
}

impl ColonizationMatrix {
    pub fn empty(n_children: usize, n_strains: usize) -> Self {
        Self { n_children, n_strains, cells: vec![false; n_children * n_strains] }
    }

    pub fn from_rows(rows: Vec<Vec<bool>>) -> Result<Self> {
        let n_strains = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_strains) {
            return Err(Error::InvalidInput("ragged colonization matrix".into()));
        }
        Ok(Self { n_children: rows.len(), n_strains, cells: rows.into_iter().flatten().collect() })
    }

    #[inline]
    pub fn get(&self, child: usize, strain: usize) -> bool {
        self.cells[child * self.n_strains + strain]
    }

    #[inline]
    pub fn set(&mut self, child: usize, strain: usize, value: bool) {
        self.cells[child * self.n_strains + strain] = value;
    }

    pub fn n_children(&self) -> usize {
        self.n_children
    }

    pub fn n_strains(&self) -> usize {
        self.n_strains
    }

    pub fn row(&self, child: usize) -> &[bool] {
        &self.cells[child * self.n_strains..(child + 1) * self.n_strains]
    }

    pub fn strain_counts(&self) -> Vec<usize> {
        (0..self.n_strains).map(|s| (0..self.n_children).filter(|&i| self.get(i, s)).count()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DaycareModel {
    pub n_strains: usize,
    pub n_children: usize,
    pub beta: f64,
    pub lambda: f64,
    pub gamma: f64,
    /// Row-major n_strains × n_strains, symmetric with zero diagonal.
    pub competition: Vec<f64>,
    pub background: Vec<f64>,
    pub dt: f64,
    pub burn_in: f64,
    pub n_observations: usize,
    /// Time between consecutive equilibrium snapshots.
    pub snapshot_interval: f64,
    pub integrator: Integrator,
}

impl DaycareModel {
    /// Defaults: 47 children, 11 snapshots, uniform background prevalence,
    /// no competition, dt = 0.1, burn-in 50, snapshots 5 time units apart.
    pub fn new(n_strains: usize, beta: f64, lambda: f64) -> Self {
        Self {
            n_strains,
            n_children: DEFAULT_CHILDREN,
            beta,
            lambda,
            gamma: 1.0,
            competition: vec![0.0; n_strains * n_strains],
            background: vec![1.0 / n_strains.max(1) as f64; n_strains],
            dt: 0.1,
            burn_in: 50.0,
            n_observations: DEFAULT_OBSERVATIONS,
            snapshot_interval: 5.0,
            integrator: Integrator::TauLeap,
        }
    }

    pub fn set_competition(&mut self, a: usize, b: usize, value: f64) {
        self.competition[a * self.n_strains + b] = value;
        self.competition[b * self.n_strains + a] = value;
    }

    #[inline]
    pub fn theta(&self, a: usize, b: usize) -> f64 {
        self.competition[a * self.n_strains + b]
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.n_strains;
        if s == 0 || self.n_children == 0 || self.n_observations == 0 {
            return Err(Error::InvalidInput("daycare model needs strains, children and observations".into()));
        }
        if self.competition.len() != s * s || self.background.len() != s {
            return Err(Error::DimensionMismatch { expected: s * s, got: self.competition.len() });
        }
        for a in 0..s {
            if self.theta(a, a) != 0.0 {
                return Err(Error::InvalidInput(format!("competition diagonal must be zero (strain {a})")));
            }
            for b in 0..s {
                let v = self.theta(a, b);
                if !(v.is_finite() && v >= 0.0) || v != self.theta(b, a) {
                    return Err(Error::InvalidInput(format!("competition must be symmetric and non-negative at ({a}, {b})")));
                }
            }
        }
        let nonneg = [("beta", self.beta), ("lambda", self.lambda), ("gamma", self.gamma)];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.background.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidInput("background prevalence must be non-negative".into()));
        }
        if !(self.dt > 0.0 && self.burn_in >= 0.0 && self.snapshot_interval > 0.0) {
            return Err(Error::InvalidInput("dt and snapshot interval must be positive".into()));
        }
        Ok(())
    }

    /// Acquisition rate of `strain` for `child` given the current state and
    /// the per-strain carriage counts.
    fn acquisition_rate(&self, state: &ColonizationMatrix, counts: &[usize], child: usize, strain: usize) -> f64 {
        let others = self.n_children.saturating_sub(1);
        let exposure = if others == 0 {
            0.0
        } else {
            let own = usize::from(state.get(child, strain));
            (counts[strain] - own) as f64 / others as f64
        };
        let base = self.beta * exposure + self.lambda * self.background[strain];
        let row = state.row(child);
        if row.iter().any(|&c| c) {
            let load: f64 = row.iter().enumerate().filter(|(_, &c)| c).map(|(j, _)| self.theta(strain, j)).sum();
            base * competition_factor(load)
        } else {
            base
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DaycareOutput {
    pub snapshots: Vec<ColonizationMatrix>,
    /// Step probabilities that exceeded one and were clamped.
    pub clamped_events: usize,
    pub summaries: DaycareSummaries,
}

pub fn daycare_simulate(model: &DaycareModel, seed: u64) -> Result<DaycareOutput, SimulationError> {
    model.validate().map_err(|e| SimulationError::InvalidParameters(e.to_string()))?;
    let mut rng = substream(&[seed]);
    let (snapshots, clamped_events) = match model.integrator {
        Integrator::TauLeap => run_tau_leap(model, &mut rng),
        Integrator::Gillespie => (run_gillespie(model, &mut rng), 0),
    };
    let summaries = daycare_summaries(&snapshots);
    Ok(DaycareOutput { snapshots, clamped_events, summaries })
}

fn run_tau_leap<R: Rng>(model: &DaycareModel, rng: &mut R) -> (Vec<ColonizationMatrix>, usize) {
    let burn_steps = (model.burn_in / model.dt).round() as usize;
    let gap_steps = ((model.snapshot_interval / model.dt).round() as usize).max(1);
    let clear_p = (model.gamma * model.dt).min(1.0);
    let mut clamped = usize::from(model.gamma * model.dt > 1.0);
    let mut state = ColonizationMatrix::empty(model.n_children, model.n_strains);
    let mut snapshots = Vec::with_capacity(model.n_observations);
    for k in 0..model.n_observations {
        let steps = if k == 0 { burn_steps } else { gap_steps };
        for _ in 0..steps {
            let counts = state.strain_counts();
            let mut next = state.clone();
            for i in 0..model.n_children {
                for s in 0..model.n_strains {
                    if state.get(i, s) {
                        if rng.random::<f64>() < clear_p {
                            next.set(i, s, false);
                        }
                    } else {
                        let mut p = model.acquisition_rate(&state, &counts, i, s) * model.dt;
                        if p > 1.0 {
                            clamped += 1;
                            p = 1.0;
                        }
                        if p > 0.0 && rng.random::<f64>() < p {
                            next.set(i, s, true);
                        }
                    }
                }
            }
            state = next;
        }
        snapshots.push(state.clone());
    }
    (snapshots, clamped)
}

fn run_gillespie<R: Rng>(model: &DaycareModel, rng: &mut R) -> Vec<ColonizationMatrix> {
    let (n, s) = (model.n_children, model.n_strains);
    let record_times: Vec<f64> = (0..model.n_observations).map(|k| model.burn_in + k as f64 * model.snapshot_interval).collect();
    let mut state = ColonizationMatrix::empty(n, s);
    let mut snapshots = Vec::with_capacity(record_times.len());
    let mut t = 0.0;
    let mut rates = vec![0.0; n * s];
    loop {
        let counts = state.strain_counts();
        for i in 0..n {
            for j in 0..s {
                rates[i * s + j] = if state.get(i, j) { model.gamma } else { model.acquisition_rate(&state, &counts, i, j) };
            }
        }
        let total: f64 = rates.iter().sum();
        let tau = if total > 0.0 { Exp::new(total).map(|d| d.sample(rng)).unwrap_or(f64::INFINITY) } else { f64::INFINITY };
        while snapshots.len() < record_times.len() && t + tau >= record_times[snapshots.len()] {
            snapshots.push(state.clone());
        }
        if snapshots.len() == record_times.len() {
            return snapshots;
        }
        t += tau;
        let mut target = rng.random::<f64>() * total;
        let mut event = rates.len() - 1;
        for (idx, &r) in rates.iter().enumerate() {
            if target < r {
                event = idx;
                break;
            }
            target -= r;
        }
        let (i, j) = (event / s, event % s);
        state.set(i, j, !state.get(i, j));
    }
}

/// Summary statistics of a set of snapshots.
#[derive(Debug, Clone, PartialEq)]
pub struct DaycareSummaries {
    /// Shannon index (natural log) of the pooled strain distribution.
    pub shannon: f64,
    pub n_observed_strains: f64,
    pub prevalence: Vec<f64>,
    /// Fraction of child-snapshots carrying two or more strains.
    pub multiple_colonization: f64,
    /// Normalised co-prevalence for strain pairs a < b, lexicographic order.
    pub coprevalence: Vec<f64>,
}

impl DaycareSummaries {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.shannon, self.n_observed_strains];
        v.extend(&self.prevalence);
        v.push(self.multiple_colonization);
        v.extend(&self.coprevalence);
        v
    }

    /// Number of entries before the co-prevalence block.
    pub fn n_population_summaries(n_strains: usize) -> usize {
        n_strains + 3
    }
}

pub fn strain_pairs(n_strains: usize) -> Vec<(usize, usize)> {
    (0..n_strains).flat_map(|a| (a + 1..n_strains).map(move |b| (a, b))).collect()
}

pub fn summary_names(n_strains: usize) -> Vec<String> {
    let mut names = vec!["shannon".to_string(), "n_strains_observed".to_string()];
    names.extend((0..n_strains).map(|s| format!("prevalence_{s}")));
    names.push("multiple_colonization".into());
    names.extend(strain_pairs(n_strains).into_iter().map(|(a, b)| format!("coprevalence_{a}_{b}")));
    names
}

/// φ_ab = (0.01 + Σ X_a X_b) / sqrt(n (0.01 + Σ X_a)(0.01 + Σ X_b)), sums over
/// snapshots and children, n the number of snapshots.
pub fn coprevalence(joint: f64, count_a: f64, count_b: f64, n_snapshots: usize) -> f64 {
    let e = COPREVALENCE_SMOOTHING;
    (e + joint) / (n_snapshots as f64 * (e + count_a) * (e + count_b)).sqrt()
}

pub fn shannon_index(counts: &[f64]) -> f64 {
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    -counts.iter().filter(|&&c| c > 0.0).map(|&c| {
        let p = c / total;
        p * p.ln()
    }).sum::<f64>()
}

pub fn daycare_summaries(snapshots: &[ColonizationMatrix]) -> DaycareSummaries {
    let n_strains = snapshots.first().map_or(0, ColonizationMatrix::n_strains);
    let n_snap = snapshots.len();
    let child_samples: usize = snapshots.iter().map(ColonizationMatrix::n_children).sum();
    let mut counts = vec![0.0; n_strains];
    let mut joint = vec![0.0; n_strains * n_strains];
    let mut multiple = 0usize;
    for snap in snapshots {
        for i in 0..snap.n_children() {
            let row = snap.row(i);
            let carried: Vec<usize> = (0..n_strains).filter(|&s| row[s]).collect();
            if carried.len() >= 2 {
                multiple += 1;
            }
            for (x, &a) in carried.iter().enumerate() {
                counts[a] += 1.0;
                for &b in &carried[x + 1..] {
                    joint[a * n_strains + b] += 1.0;
                }
            }
        }
    }
    let denom = child_samples.max(1) as f64;
    DaycareSummaries {
        shannon: shannon_index(&counts),
        n_observed_strains: counts.iter().filter(|&&c| c > 0.0).count() as f64,
        prevalence: counts.iter().map(|c| c / denom).collect(),
        multiple_colonization: multiple as f64 / denom,
        coprevalence: strain_pairs(n_strains)
            .into_iter()
            .map(|(a, b)| coprevalence(joint[a * n_strains + b], counts[a], counts[b], n_snap))
            .collect(),
    }
}

/// θ = (β, Λ, θ_01, θ_02, …) over the strain pairs in lexicographic order.
#[derive(Debug, Clone)]
pub struct DaycareSimulator {
    pub template: DaycareModel,
}

impl DaycareSimulator {
    pub fn new(template: DaycareModel) -> Self {
        Self { template }
    }

    pub fn dim(&self) -> usize {
        parameter_dim(self.template.n_strains)
    }

    pub fn model(&self, theta: &[f64]) -> Result<DaycareModel, SimulationError> {
        if theta.len() != self.dim() {
            return Err(SimulationError::InvalidParameters(format!("expected {} parameters, got {}", self.dim(), theta.len())));
        }
        let mut m = self.template.clone();
        m.beta = theta[0];
        m.lambda = theta[1];
        for (k, (a, b)) in strain_pairs(m.n_strains).into_iter().enumerate() {
            m.set_competition(a, b, theta[2 + k]);
        }
        Ok(m)
    }
}

impl ForwardModel for DaycareSimulator {
    fn summary_names(&self) -> Vec<String> {
        summary_names(self.template.n_strains)
    }

    fn simulate_summaries(&self, theta: &[f64], seed: u64) -> Result<Vec<f64>, SimulationError> {
        Ok(daycare_simulate(&self.model(theta)?, seed)?.summaries.to_vec())
    }
}

/// n_s(n_s − 1)/2 competition parameters plus β and Λ.
pub fn parameter_dim(n_strains: usize) -> usize {
    n_strains * (n_strains.saturating_sub(1)) / 2 + 2
}

/// Inverse of [`parameter_dim`], if `dim` is a valid parameter count.
pub fn strains_for_dim(dim: usize) -> Option<usize> {
    (1..64).find(|&s| parameter_dim(s) == dim)
}

pub fn parameter_names(n_strains: usize) -> Vec<String> {
    let mut names = vec!["beta".to_string(), "lambda".to_string()];
    names.extend(strain_pairs(n_strains).into_iter().map(|(a, b)| format!("theta_{a}_{b}")));
    names
}

pub fn daycare_space(n_strains: usize) -> Result<ParameterSpace> {
    let p = parameter_dim(n_strains);
    let mut lower = vec![COMPETITION_PRIOR.0; p];
    let mut upper = vec![COMPETITION_PRIOR.1; p];
    for j in 0..2 {
        lower[j] = RATE_PRIOR.0;
        upper[j] = RATE_PRIOR.1;
    }
    ParameterSpace::new(parameter_names(n_strains), lower, upper)
}

/// β and Λ share the summed population summaries; each θ_ab uses its own
/// co-prevalence.
pub fn daycare_discrepancy_map(n_strains: usize, norm: DiscrepancyNorm, aggregation: GroupAggregation) -> DiscrepancyMap {
    let pop = DaycareSummaries::n_population_summaries(n_strains);
    let pop_group: Vec<usize> = (0..pop).collect();
    let mut groups = vec![pop_group.clone(), pop_group];
    groups.extend((0..strain_pairs(n_strains).len()).map(|k| vec![pop + k]));
    DiscrepancyMap::new(groups, norm).with_aggregation(aggregation)
}

pub fn daycare_spec(
    template: DaycareModel,
    observed: Vec<f64>,
    norm: DiscrepancyNorm,
    aggregation: GroupAggregation,
) -> Result<SimulatorSpec> {
    let s = template.n_strains;
    let map = daycare_discrepancy_map(s, norm, aggregation);
    SimulatorSpec::new(daycare_space(s)?, Arc::new(DaycareSimulator::new(template)), map, observed)
}

/// Transmission rates of the synthetic truth, in the range of values fitted
/// to real daycare data.
pub const DEFAULT_TRUE_BETA: f64 = 5.0;
pub const DEFAULT_TRUE_LAMBDA: f64 = 7.0;

/// Synthetic daycare problem: the listed strain pairs compete at strength
/// `competition`, every other pair is neutral.
#[derive(Debug, Clone)]
pub struct DaycareProblem {
    pub template: DaycareModel,
    pub truth: Vec<f64>,
    pub observed: Vec<f64>,
}

impl DaycareProblem {
    pub fn synthetic(
        template: DaycareModel,
        beta: f64,
        lambda: f64,
        competitive: &[(usize, usize)],
        competition: f64,
        seed: u64,
    ) -> Result<Self> {
        let s = template.n_strains;
        for &(a, b) in competitive {
            if a == b || a >= s || b >= s {
                return Err(Error::InvalidInput(format!("invalid competitive pair ({a}, {b}) for {s} strains")));
            }
        }
        let mut truth = vec![beta, lambda];
        truth.extend(strain_pairs(s).into_iter().map(|(a, b)| {
            let hit = competitive.iter().any(|&(x, y)| (x, y) == (a, b) || (y, x) == (a, b));
            if hit { competition } else { 0.0 }
        }));
        let simulator = DaycareSimulator::new(template.clone());
        let observed = simulator.simulate_summaries(&truth, derive_seed(&[seed, role::OBSERVED]))?;
        Ok(Self { template, truth, observed })
    }

    pub fn spec(&self, norm: DiscrepancyNorm, aggregation: GroupAggregation) -> Result<SimulatorSpec> {
        daycare_spec(self.template.clone(), self.observed.clone(), norm, aggregation)
    }
}
