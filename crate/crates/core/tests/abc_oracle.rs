//! Marginal rejection ABC against a rank-counting oracle.

mod common;

use proptest::prelude::*;

use splitbolfi::abc::{accept, pool_size, run_abc, simulate_pool, AbcPool};
use splitbolfi::harness::{evaluate_abc_cell, AbcSection, ExperimentConfig, ModelKind};
use splitbolfi::simulators::gaussian::GaussianProblem;
use splitbolfi::simulators::DiscrepancyNorm;

use common::rank_oracle;

fn pool_from(d: Vec<Vec<f64>>) -> AbcPool {
    let n = d.len();
    AbcPool {
        indices: (0..n).collect(),
        params: (0..n).map(|i| vec![i as f64; d[0].len()]).collect(),
        discrepancies: d,
        failed: 0,
        size: n,
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn acceptance_matches_rank_oracle(
        rows in proptest::collection::vec(proptest::collection::vec(0u8..6, 3), 1..80),
        n_frac in 0.0f64..1.0,
    ) {
        // Few distinct values, so ties are common.
        let d: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|&v| f64::from(v) * 0.25).collect()).collect();
        let n = 1 + ((d.len() - 1) as f64 * n_frac) as usize;
        let names = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        let run = accept(names, pool_from(d.clone()), 0.5, n).unwrap();
        for j in 0..3 {
            let col: Vec<f64> = d.iter().map(|r| r[j]).collect();
            prop_assert_eq!(&run.accepted[j], &rank_oracle(&col, n));
        }
    }
}

#[test]
fn pool_sizes_round_up_exactly() {
    assert_eq!(pool_size(0.01, 10).unwrap(), 1000);
    assert_eq!(pool_size(0.004, 50).unwrap(), 12_500);
    assert_eq!(pool_size(0.1, 1).unwrap(), 10);
    assert_eq!(pool_size(0.3, 1).unwrap(), 4);
    assert!(pool_size(0.0, 1).is_err());
    assert!(pool_size(1.5, 1).is_err());
}

#[test]
fn smaller_pool_is_a_prefix() {
    let p = GaussianProblem::synthetic(3, 100, (-2.0, 2.0), 4);
    let spec = p.spec(DiscrepancyNorm::Absolute).unwrap();
    let big = simulate_pool(&spec, 60, 9);
    let small = simulate_pool(&spec, 25, 9);
    assert_eq!(big.prefix(25), small);
    let run = run_abc(&spec, 0.1, 6, 9).unwrap();
    assert_eq!(run.budget(), 60);
    assert_eq!(run.pool, big);
}

/// Accepting one draw out of ten leaves roughly the prior spread.
#[test]
fn single_sample_rmse_is_prior_scale() {
    let mut config = ExperimentConfig::new(ModelKind::Gaussian, vec![5, 10], vec![50], vec![1.0], (0..10).collect());
    config.abc = Some(AbcSection { q: vec![0.1], n_samples: vec![1] });
    let mut all = Vec::new();
    for &dim in &config.dims {
        for &seed in &config.seeds {
            let rows = evaluate_abc_cell(&config, dim, seed).unwrap();
            assert_eq!(rows[0].budget, 10);
            assert!(rows[0].sd.is_none());
            all.push(rows[0].rmse_gen.unwrap());
        }
    }
    let mean = all.iter().sum::<f64>() / all.len() as f64;
    assert!((mean - 0.57).abs() <= 0.15, "mean RMSE {mean}");
}
