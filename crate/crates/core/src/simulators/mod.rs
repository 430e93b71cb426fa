//! Forward models, their summary statistics, and the per-parameter
//! discrepancy mapping that feeds the engine.

pub mod daycare;
pub mod gaussian;
pub mod gvar;
pub mod io;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::space::ParameterSpace;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulationError {
    #[error("trajectory became non-finite at step {step}")]
    NonFinite { step: usize },
    #[error("invalid parameter vector: {0}")]
    InvalidParameters(String),
    #[error("discrepancy for parameter {index} is not a finite non-negative number ({value})")]
    BadDiscrepancy { index: usize, value: f64 },
}

/// A simulator reduced to its summary statistics. Implementations must be
/// pure functions of `(theta, seed)`.
pub trait ForwardModel: Send + Sync {
    fn summary_names(&self) -> Vec<String>;
    fn simulate_summaries(&self, theta: &[f64], seed: u64) -> Result<Vec<f64>, SimulationError>;
}

/// How a summary difference becomes a discrepancy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscrepancyNorm {
    /// |Δ|, the Euclidean norm of a scalar difference.
    #[default]
    Absolute,
    /// Δ².
    Squared,
}

impl DiscrepancyNorm {
    #[inline]
    pub fn apply(self, diff: f64) -> f64 {
        match self {
            DiscrepancyNorm::Absolute => diff.abs(),
            DiscrepancyNorm::Squared => diff * diff,
        }
    }
}

/// How a group of several summaries is reduced to one discrepancy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupAggregation {
    /// norm(Σ_k φ_k(sim) − Σ_k φ_k(obs)).
    #[default]
    SumOfSummaries,
    /// Σ_k norm(φ_k(sim) − φ_k(obs)); differences of opposite sign cannot cancel.
    SumOfDiscrepancies,
}

/// For parameter j, the discrepancy over the summaries in group G_j; see
/// [`GroupAggregation`]. Singleton groups reduce to norm(φ_k(sim) − φ_k(obs)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyMap {
    groups: Vec<Vec<usize>>,
    norm: DiscrepancyNorm,
    #[serde(default)]
    aggregation: GroupAggregation,
}

impl DiscrepancyMap {
    pub fn new(groups: Vec<Vec<usize>>, norm: DiscrepancyNorm) -> Self {
        Self { groups, norm, aggregation: GroupAggregation::default() }
    }

    pub fn with_aggregation(mut self, aggregation: GroupAggregation) -> Self {
        self.aggregation = aggregation;
        self
    }

    pub fn aggregation(&self) -> GroupAggregation {
        self.aggregation
    }

    /// One summary per parameter, in order.
    pub fn identity(p: usize, norm: DiscrepancyNorm) -> Self {
        Self::new((0..p).map(|j| vec![j]).collect(), norm)
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn norm(&self) -> DiscrepancyNorm {
        self.norm
    }

    pub fn apply(&self, simulated: &[f64], observed: &[f64]) -> Vec<f64> {
        self.groups
            .iter()
            .map(|g| match self.aggregation {
                GroupAggregation::SumOfSummaries => {
                    let s: f64 = g.iter().map(|&k| simulated[k]).sum();
                    let o: f64 = g.iter().map(|&k| observed[k]).sum();
                    self.norm.apply(s - o)
                }
                GroupAggregation::SumOfDiscrepancies => {
                    g.iter().map(|&k| self.norm.apply(simulated[k] - observed[k])).sum()
                }
            })
            .collect()
    }
}

/// Everything the engine and the ABC baseline need to turn a parameter vector
/// into per-parameter discrepancies.
#[derive(Clone)]
pub struct SimulatorSpec {
    space: ParameterSpace,
    model: Arc<dyn ForwardModel>,
    discrepancy_map: DiscrepancyMap,
    observed: Vec<f64>,
}

impl fmt::Debug for SimulatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SimulatorSpec")
            .field("space", &self.space)
            .field("discrepancy_map", &self.discrepancy_map)
            .field("observed", &self.observed)
            .finish_non_exhaustive()
    }
}

impl SimulatorSpec {
    pub fn new(
        space: ParameterSpace,
        model: Arc<dyn ForwardModel>,
        discrepancy_map: DiscrepancyMap,
        observed: Vec<f64>,
    ) -> Result<Self> {
        let n_summaries = model.summary_names().len();
        if observed.len() != n_summaries {
            return Err(Error::DimensionMismatch { expected: n_summaries, got: observed.len() });
        }
        if discrepancy_map.groups.len() != space.dim() {
            return Err(Error::DimensionMismatch { expected: space.dim(), got: discrepancy_map.groups.len() });
        }
        for g in &discrepancy_map.groups {
            if g.is_empty() || g.iter().any(|&k| k >= n_summaries) {
                return Err(Error::InvalidInput(format!(
                    "discrepancy group {g:?} must be non-empty and index one of {n_summaries} summaries"
                )));
            }
        }
        if let Some(v) = observed.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("observed summaries must be finite, found {v}")));
        }
        Ok(Self { space, model, discrepancy_map, observed })
    }

    /// The same simulator and discrepancy map against other observed summaries.
    pub fn with_observed(&self, observed: Vec<f64>) -> Result<Self> {
        Self::new(self.space.clone(), Arc::clone(&self.model), self.discrepancy_map.clone(), observed)
    }

    pub fn space(&self) -> &ParameterSpace {
        &self.space
    }

    pub fn model(&self) -> &dyn ForwardModel {
        self.model.as_ref()
    }

    pub fn discrepancy_map(&self) -> &DiscrepancyMap {
        &self.discrepancy_map
    }

    pub fn observed(&self) -> &[f64] {
        &self.observed
    }

    pub fn summary_names(&self) -> Vec<String> {
        self.model.summary_names()
    }

    /// Simulate at `theta` and map the summaries to per-parameter discrepancies.
    pub fn discrepancies(&self, theta: &[f64], seed: u64) -> Result<Vec<f64>, SimulationError> {
        if theta.len() != self.space.dim() {
            return Err(SimulationError::InvalidParameters(format!(
                "expected {} parameters, got {}",
                self.space.dim(),
                theta.len()
            )));
        }
        let sim = self.model.simulate_summaries(theta, seed)?;
        let d = self.discrepancy_map.apply(&sim, &self.observed);
        if let Some((index, &value)) = d.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(SimulationError::BadDiscrepancy { index, value });
        }
        Ok(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_summaries_give_zero_discrepancy() {
        let map = DiscrepancyMap::new(vec![vec![0], vec![1, 2]], DiscrepancyNorm::Squared);
        let obs = [0.3, 1.0, -2.0];
        assert_eq!(map.apply(&obs, &obs), vec![0.0, 0.0]);
        let d = map.apply(&[0.5, 1.5, -2.0], &obs);
        assert!((d[0] - 0.04).abs() < 1e-12 && (d[1] - 0.25).abs() < 1e-12);
        let abs = DiscrepancyMap::new(vec![vec![0], vec![1, 2]], DiscrepancyNorm::Absolute);
        assert_eq!(abs.apply(&[0.5, 0.5, -2.0], &obs), vec![0.2, 0.5]);
        // Offsetting differences cancel only when summaries are summed first.
        let shifted = [0.3, 1.5, -2.5];
        assert_eq!(abs.apply(&shifted, &obs)[1], 0.0);
        let per = abs.clone().with_aggregation(GroupAggregation::SumOfDiscrepancies);
        assert_eq!(per.apply(&shifted, &obs)[1], 1.0);
    }
}
