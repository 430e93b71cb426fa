//! Marginal rejection ABC from a single prior-simulation pool.
//!
//! The pool is simulated once; for each parameter the n draws with the
//! smallest discrepancy for that parameter are accepted.

use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, role, substream};
use crate::simulators::SimulatorSpec;

/// ceil(n_samples / q), guarding against float round-up such as 10/0.01.
pub fn pool_size(q: f64, n_samples: usize) -> Result<usize> {
    if !(q > 0.0 && q < 1.0) && q != 1.0 {
        return Err(Error::InvalidInput(format!("quantile q must lie in (0, 1], got {q}")));
    }
    if n_samples == 0 {
        return Err(Error::InvalidInput("n_samples must be at least 1".into()));
    }
    Ok((n_samples as f64 / q - 1e-9).ceil() as usize)
}

/// Prior draws with their per-parameter discrepancies. Draw i depends only on
/// (seed, i), so a smaller pool is a prefix of a larger one.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AbcPool {
    /// Draw index of each retained row.
    pub indices: Vec<usize>,
    pub params: Vec<Vec<f64>>,
    pub discrepancies: Vec<Vec<f64>>,
    /// Draws whose simulation failed; they are dropped from the pool.
    pub failed: usize,
    /// Number of draws attempted.
    pub size: usize,
}

impl AbcPool {
    /// The rows among the first `n` draws.
    pub fn prefix(&self, n: usize) -> AbcPool {
        let k = self.indices.partition_point(|&i| i < n);
        AbcPool {
            indices: self.indices[..k].to_vec(),
            params: self.params[..k].to_vec(),
            discrepancies: self.discrepancies[..k].to_vec(),
            failed: n.min(self.size) - k,
            size: n.min(self.size),
        }
    }
}

pub fn simulate_pool(spec: &SimulatorSpec, n: usize, seed: u64) -> AbcPool {
    let space = spec.space();
    let rows: Vec<(usize, Vec<f64>, Option<Vec<f64>>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let theta = space.sample(&mut substream(&[seed, i as u64, role::ABC_PRIOR]));
            let d = spec.discrepancies(&theta, derive_seed(&[seed, i as u64, role::ABC_SIMULATE]));
            if let Err(e) = &d {
                warn!("ABC draw {i} dropped: {e}");
            }
            (i, theta, d.ok())
        })
        .collect();
    let mut pool = AbcPool { size: n, ..AbcPool::default() };
    for (i, theta, d) in rows {
        match d {
            Some(d) => {
                pool.indices.push(i);
                pool.params.push(theta);
                pool.discrepancies.push(d);
            }
            None => pool.failed += 1,
        }
    }
    pool
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbcRun {
    pub names: Vec<String>,
    pub pool: AbcPool,
    pub q: f64,
    pub n_samples: usize,
    /// Per parameter, pool rows accepted, in increasing discrepancy order.
    pub accepted: Vec<Vec<usize>>,
}

impl AbcRun {
    pub fn budget(&self) -> usize {
        self.pool.size
    }

    pub fn accepted_values(&self, j: usize) -> Vec<f64> {
        self.accepted[j].iter().map(|&r| self.pool.params[r][j]).collect()
    }
}

/// Rows of the `n` smallest values, ties to the earlier row.
pub fn smallest_indices(values: &[f64], n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    order.truncate(n);
    order
}

/// Accept per parameter from an existing pool.
pub fn accept(names: Vec<String>, pool: AbcPool, q: f64, n_samples: usize) -> Result<AbcRun> {
    if pool.params.len() < n_samples {
        return Err(Error::InvalidInput(format!(
            "pool has {} successful simulations, fewer than n_samples = {n_samples}",
            pool.params.len()
        )));
    }
    let accepted = (0..names.len())
        .map(|j| {
            let d: Vec<f64> = pool.discrepancies.iter().map(|r| r[j]).collect();
            smallest_indices(&d, n_samples)
        })
        .collect();
    Ok(AbcRun { names, pool, q, n_samples, accepted })
}

pub fn run_abc(spec: &SimulatorSpec, q: f64, n_samples: usize, seed: u64) -> Result<AbcRun> {
    let n = pool_size(q, n_samples)?;
    let pool = simulate_pool(spec, n, seed);
    accept(spec.space().names().to_vec(), pool, q, n_samples)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbcEstimate {
    pub mean: f64,
    /// Unbiased sample sd; missing for a single accepted sample.
    pub sd: Option<f64>,
}

pub fn sample_estimate(values: &[f64]) -> AbcEstimate {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.len() >= 2)
        .then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    AbcEstimate { mean, sd }
}

pub fn abc_estimates(run: &AbcRun) -> Vec<AbcEstimate> {
    (0..run.names.len()).map(|j| sample_estimate(&run.accepted_values(j))).collect()
}

/// Columns pool_index, θ…, d_…, accepted_….
pub fn write_abc_csv<P: AsRef<Path>>(path: P, run: &AbcRun) -> Result<()> {
    let p = run.names.len();
    let mut flags = vec![vec![false; p]; run.pool.params.len()];
    for (j, rows) in run.accepted.iter().enumerate() {
        for &r in rows {
            flags[r][j] = true;
        }
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["pool_index".to_string()];
    header.extend(run.names.iter().cloned());
    header.extend(run.names.iter().map(|n| format!("d_{n}")));
    header.extend(run.names.iter().map(|n| format!("accepted_{n}")));
    w.write_record(&header)?;
    for (r, &idx) in run.pool.indices.iter().enumerate() {
        let mut rec = vec![idx.to_string()];
        rec.extend(run.pool.params[r].iter().map(f64::to_string));
        rec.extend(run.pool.discrepancies[r].iter().map(f64::to_string));
        rec.extend(flags[r].iter().map(|&f| u8::from(f).to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pool_sizes() {
        assert_eq!(pool_size(0.01, 10).unwrap(), 1000);
        assert_eq!(pool_size(0.004, 50).unwrap(), 12500);
        assert_eq!(pool_size(0.1, 1).unwrap(), 10);
        assert_eq!(pool_size(0.3, 1).unwrap(), 4);
        assert!(pool_size(0.0, 1).is_err());
        assert!(pool_size(0.1, 0).is_err());
    }

    #[test]
    fn two_point_estimate() {
        let e = sample_estimate(&[0.0, 0.2]);
        assert!((e.mean - 0.1).abs() < 1e-15);
        assert!((e.sd.unwrap() - 0.141_421_356).abs() < 1e-8);
        assert_eq!(sample_estimate(&[0.3]).sd, None);
    }

    #[test]
    fn ties_go_to_earlier_rows() {
        assert_eq!(smallest_indices(&[0.5, 0.1, 0.1, 0.0], 3), vec![3, 1, 2]);
    }

    #[test]
    fn prefix_of_pool() {
        let pool = AbcPool {
            indices: vec![0, 2, 3],
            params: vec![vec![0.0], vec![2.0], vec![3.0]],
            discrepancies: vec![vec![0.0], vec![2.0], vec![3.0]],
            failed: 1,
            size: 4,
        };
        let pre = pool.prefix(3);
        assert_eq!(pre.indices, vec![0, 2]);
        assert_eq!(pre.failed, 1);
        assert_eq!(pre.size, 3);
    }
}
