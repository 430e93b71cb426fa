//! End-to-end behaviour of the Split-BOLFI loop.

use std::sync::Arc;

use splitbolfi::engine::{run_split_bolfi, run_split_bolfi_with_checkpoints, FitResult, RunDiagnostics, SplitBolfiConfig};
use splitbolfi::simulators::gaussian::GaussianProblem;
use splitbolfi::simulators::{DiscrepancyMap, DiscrepancyNorm, ForwardModel, SimulationError, SimulatorSpec};
use splitbolfi::space::ParameterSpace;

fn gaussian(dim: usize, seed: u64) -> SimulatorSpec {
    GaussianProblem::synthetic(dim, 100, (-5.0, 5.0), seed).spec(DiscrepancyNorm::Absolute).unwrap()
}

/// Serialized fit with the run-dependent counters cleared.
fn canonical(fit: &FitResult) -> String {
    let mut f = fit.clone();
    f.diagnostics = RunDiagnostics::default();
    f.to_json().unwrap()
}

#[test]
fn same_seed_same_fit() {
    let spec = gaussian(3, 1);
    let cfg = SplitBolfiConfig::default();
    let a = run_split_bolfi(&spec, 30, &cfg, 5).unwrap();
    let b = run_split_bolfi(&spec, 30, &cfg, 5).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    let c = run_split_bolfi(&spec, 30, &cfg, 6).unwrap();
    assert_ne!(a.log.params, c.log.params);
}

#[test]
fn checkpoints_equal_standalone_runs() {
    let spec = gaussian(2, 3);
    let cfg = SplitBolfiConfig::default();
    let fits = run_split_bolfi_with_checkpoints(&spec, &[12, 25, 40], &cfg, 11).unwrap();
    assert_eq!(fits.iter().map(|f| f.n_acq).collect::<Vec<_>>(), vec![12, 25, 40]);
    for fit in &fits {
        let alone = run_split_bolfi(&spec, fit.n_acq, &cfg, 11).unwrap();
        assert_eq!(canonical(fit), canonical(&alone), "budget {}", fit.n_acq);
    }
    assert!(run_split_bolfi_with_checkpoints(&spec, &[25, 12], &cfg, 11).is_err());
}

#[test]
fn budget_is_spent_exactly() {
    let spec = gaussian(4, 2);
    let cfg = SplitBolfiConfig::default();
    for n in [10, 17, 35] {
        let fit = run_split_bolfi(&spec, n, &cfg, 8).unwrap();
        assert_eq!(fit.diagnostics.simulator_calls, n);
        assert_eq!(fit.log.len(), n);
        assert_eq!(fit.log.rounds, (0..n).collect::<Vec<_>>());
        assert_eq!(fit.surrogates.len(), 4);
        for (j, x) in fit.argmin.iter().enumerate() {
            let (lo, hi) = fit.space.bounds(j);
            assert!(*x >= lo && *x <= hi);
        }
    }
}

#[test]
fn initial_design_only() {
    let spec = gaussian(3, 4);
    let cfg = SplitBolfiConfig::default();
    let n = cfg.acquisition.n_init;
    let fit = run_split_bolfi(&spec, n, &cfg, 1).unwrap();
    assert_eq!(fit.log.len(), n);
    // Initial rounds are prior draws, so any other fit shares them.
    let longer = run_split_bolfi(&spec, n + 5, &cfg, 1).unwrap();
    assert_eq!(fit.log.params[..], longer.log.params[..n]);
}

/// Fails for every fourth seed, so some rounds need the retry and a few lose both.
struct Flaky;

impl ForwardModel for Flaky {
    fn summary_names(&self) -> Vec<String> {
        vec!["a".into(), "b".into()]
    }

    fn simulate_summaries(&self, theta: &[f64], seed: u64) -> Result<Vec<f64>, SimulationError> {
        if seed.is_multiple_of(4) {
            return Err(SimulationError::NonFinite { step: 0 });
        }
        let noise = (seed % 1000) as f64 * 1e-4;
        Ok(vec![theta[0] + noise, theta[1] - noise])
    }
}

#[test]
fn failed_rounds_are_retried_then_skipped() {
    let space = ParameterSpace::new(vec!["a".into(), "b".into()], vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
    let spec = SimulatorSpec::new(space, Arc::new(Flaky), DiscrepancyMap::identity(2, DiscrepancyNorm::Absolute), vec![0.2, -0.3]).unwrap();
    let cfg = SplitBolfiConfig::default();
    let n = 80;
    let fit = run_split_bolfi(&spec, n, &cfg, 21).unwrap();
    let d = &fit.diagnostics;
    assert!(d.retries > 0, "{d:?}");
    assert_eq!(d.simulator_calls, n + d.retries);
    assert_eq!(fit.log.len(), n - d.skipped_rounds);
    assert!(fit.log.rounds.windows(2).all(|w| w[0] < w[1]));
    assert!(fit.log.seeds.iter().all(|s| s % 4 != 0));
}

#[test]
fn fit_survives_json_roundtrip() {
    let spec = gaussian(2, 7);
    let fit = run_split_bolfi(&spec, 20, &SplitBolfiConfig::default(), 3).unwrap();
    let back = FitResult::from_json(&fit.to_json().unwrap()).unwrap();
    assert_eq!(back.to_json().unwrap(), fit.to_json().unwrap());
    for j in 0..2 {
        let (a, b) = (fit.proxy(j, 1.0, 128).unwrap(), back.proxy(j, 1.0, 128).unwrap());
        assert_eq!(a.density, b.density);
    }
}
