use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Named parameters with independent uniform priors on `[lower, upper]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace")]
pub struct ParameterSpace {
    names: Vec<String>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Deserialize)]
struct RawSpace {
    names: Vec<String>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<RawSpace> for ParameterSpace {
    type Error = Error;

    fn try_from(raw: RawSpace) -> Result<Self> {
        ParameterSpace::new(raw.names, raw.lower, raw.upper)
    }
}

impl ParameterSpace {
    pub fn new(names: Vec<String>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if names.len() != lower.len() || names.len() != upper.len() {
            return Err(Error::InvalidInput(format!(
                "parameter space needs equal-length names/lower/upper ({}, {}, {})",
                names.len(),
                lower.len(),
                upper.len()
            )));
        }
        if names.is_empty() {
            return Err(Error::InvalidInput("parameter space must have at least one parameter".into()));
        }
        let mut seen = HashSet::new();
        for (i, name) in names.iter().enumerate() {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidInput(format!("duplicate parameter name `{name}`")));
            }
            if !(lower[i].is_finite() && upper[i].is_finite() && lower[i] < upper[i]) {
                return Err(Error::InvalidInput(format!(
                    "parameter `{name}` needs finite bounds with lower < upper, got [{}, {}]",
                    lower[i], upper[i]
                )));
            }
        }
        Ok(Self { names, lower, upper })
    }

    /// Same bounds for every parameter.
    pub fn uniform_box(names: Vec<String>, lower: f64, upper: f64) -> Result<Self> {
        let p = names.len();
        Self::new(names, vec![lower; p], vec![upper; p])
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lower[j], self.upper[j])
    }

    pub fn width(&self, j: usize) -> f64 {
        self.upper[j] - self.lower[j]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta.iter().enumerate().all(|(j, &t)| t >= self.lower[j] && t <= self.upper[j])
    }

    pub fn sample_coordinate<R: Rng + ?Sized>(&self, j: usize, rng: &mut R) -> f64 {
        rng.random_range(self.lower[j]..self.upper[j])
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.dim()).map(|j| self.sample_coordinate(j, rng)).collect()
    }

    /// Subspace made of the parameters at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        Self::new(
            indices.iter().map(|&i| self.names[i].clone()).collect(),
            indices.iter().map(|&i| self.lower[i]).collect(),
            indices.iter().map(|&i| self.upper[i]).collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i}")).collect()
    }

    #[test]
    fn rejects_bad_bounds_and_duplicates() {
        assert!(ParameterSpace::new(names(1), vec![1.0], vec![1.0]).is_err());
        assert!(ParameterSpace::new(vec!["a".into(), "a".into()], vec![0.0; 2], vec![1.0; 2]).is_err());
        assert!(ParameterSpace::new(names(2), vec![0.0], vec![1.0; 2]).is_err());
    }

    #[test]
    fn samples_lie_in_box() {
        let space = ParameterSpace::uniform_box(names(4), -2.0, 3.0).unwrap();
        let mut rng = crate::rng::substream(&[7]);
        for _ in 0..100 {
            assert!(space.contains(&space.sample(&mut rng)));
        }
    }

    #[test]
    fn deserialization_validates() {
        let bad = r#"{"names":["a"],"lower":[2.0],"upper":[1.0]}"#;
        assert!(serde_json::from_str::<ParameterSpace>(bad).is_err());
    }
}
