//! Proxy, tempering and acquisition invariants.

mod common;

use proptest::prelude::*;

use splitbolfi::acquisition::{acquire_marginal, acquire_round, AcquisitionConfig};
use splitbolfi::gp::{GpSurrogate, Hyperparams, MaternOrder};
use splitbolfi::optim::linspace;
use splitbolfi::proxy::{build_proxy_from_mean, tempering_scale, trapezoid};
use splitbolfi::rng::substream;
use splitbolfi::space::ParameterSpace;

use common::random_mean;

fn config() -> ProptestConfig {
    ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() }
}

fn sd_of(grid: &[f64], density: &[f64]) -> f64 {
    let m = trapezoid(grid, &grid.iter().zip(density).map(|(x, p)| x * p).collect::<Vec<_>>());
    let v = trapezoid(grid, &grid.iter().zip(density).map(|(x, p)| (x - m).powi(2) * p).collect::<Vec<_>>());
    v.sqrt()
}

proptest! {
    #![proptest_config(config())]

    /// exp(−(w/δ)(μ − min μ)) is unchanged by μ → cμ + b, δ → cδ.
    #[test]
    fn proxy_scale_invariance(
        coeffs in proptest::collection::vec(-1.0f64..1.0, 1..5),
        c in 0.01f64..100.0,
        b in -50.0f64..50.0,
        w in 0.1f64..10.0,
        delta in 0.01f64..2.0,
    ) {
        let grid = linspace(-2.0, 2.0, 257);
        let mu = random_mean(&grid, &coeffs);
        let base = build_proxy_from_mean(grid.clone(), mu.clone(), w, delta).unwrap();
        let scaled_mu: Vec<f64> = mu.iter().map(|m| c * m + b).collect();
        let scaled = build_proxy_from_mean(grid.clone(), scaled_mu, w, c * delta).unwrap();
        for (p, q) in base.density.iter().zip(&scaled.density) {
            prop_assert!((p - q).abs() <= 1e-9 * (1.0 + p.abs()), "{p} vs {q}");
        }
        // Only the ratio w/δ matters.
        let ratio = build_proxy_from_mean(grid, mu, w * c, delta * c).unwrap();
        for (p, q) in base.density.iter().zip(&ratio.density) {
            prop_assert!((p - q).abs() <= 1e-9 * (1.0 + p.abs()));
        }
    }

    /// The joint proxy over two parameters is the product of the marginals,
    /// and both integrate to one.
    #[test]
    fn proxy_factorizes_on_product_grid(
        c1 in proptest::collection::vec(-1.0f64..1.0, 1..4),
        c2 in proptest::collection::vec(-1.0f64..1.0, 1..4),
        w in 0.1f64..5.0,
        d1 in 0.05f64..2.0,
        d2 in 0.05f64..2.0,
    ) {
        let gx = linspace(-1.0, 1.0, 129);
        let gy = linspace(0.0, 3.0, 97);
        let (mx, my) = (random_mean(&gx, &c1), random_mean(&gy, &c2));
        let px = build_proxy_from_mean(gx.clone(), mx.clone(), w, d1).unwrap();
        let py = build_proxy_from_mean(gy.clone(), my.clone(), w, d2).unwrap();
        let (minx, miny) = (mx.iter().copied().fold(f64::INFINITY, f64::min), my.iter().copied().fold(f64::INFINITY, f64::min));
        let joint: Vec<Vec<f64>> = mx
            .iter()
            .map(|&a| my.iter().map(|&b| (-(w / d1) * (a - minx) - (w / d2) * (b - miny)).exp()).collect())
            .collect();
        let rows: Vec<f64> = joint.iter().map(|r| trapezoid(&gy, r)).collect();
        let z = trapezoid(&gx, &rows);
        for (i, row) in joint.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                let expect = px.density[i] * py.density[k];
                prop_assert!((v / z - expect).abs() <= 1e-8 * (1.0 + expect), "({i},{k}) {} vs {expect}", v / z);
            }
        }
        prop_assert!((trapezoid(&gx, &px.density) - 1.0).abs() < 1e-8);
        prop_assert!((trapezoid(&gy, &py.density) - 1.0).abs() < 1e-8);
        let marginal: Vec<f64> = rows.iter().map(|r| r / z).collect();
        for (a, b) in marginal.iter().zip(&px.density) {
            prop_assert!((a - b).abs() <= 1e-8 * (1.0 + b));
        }
    }

    /// δ = max(d_min, d_obs_min) never decreases in either argument.
    #[test]
    fn tempering_scale_monotone(d_min in -1.0f64..2.0, d_obs in 0.0f64..2.0, step in 0.0f64..1.0) {
        let base = tempering_scale(d_min, d_obs).unwrap().value;
        prop_assert!(tempering_scale(d_min + step, d_obs).unwrap().value >= base);
        prop_assert!(tempering_scale(d_min, d_obs + step).unwrap().value >= base);
        prop_assert!(base >= 1e-8);
    }

    /// Raising w (or lowering δ) sharpens the proxy: relative densities fall
    /// everywhere, and for a convex mean the sd shrinks.
    #[test]
    fn tempering_monotone_in_w_and_delta(
        coeffs in proptest::collection::vec(-1.0f64..1.0, 1..5),
        center in -1.5f64..1.5,
        w in 0.05f64..5.0,
        factor in 1.01f64..10.0,
        delta in 0.05f64..1.0,
    ) {
        let grid = linspace(-2.0, 2.0, 401);
        let mu = random_mean(&grid, &coeffs);
        let relative = |w: f64, d: f64| {
            let p = build_proxy_from_mean(grid.clone(), mu.clone(), w, d).unwrap();
            let peak = p.density.iter().copied().fold(0.0, f64::max);
            p.density.iter().map(|v| v / peak).collect::<Vec<_>>()
        };
        let (lo, hi_w, hi_d) = (relative(w, delta), relative(w * factor, delta), relative(w, delta / factor));
        for i in 0..grid.len() {
            prop_assert!(hi_w[i] <= lo[i] + 1e-12);
            prop_assert!(hi_d[i] <= lo[i] + 1e-12);
        }

        let bowl: Vec<f64> = grid.iter().map(|x| (x - center).powi(2)).collect();
        let sd = |w: f64, d: f64| {
            let p = build_proxy_from_mean(grid.clone(), bowl.clone(), w, d).unwrap();
            sd_of(&grid, &p.density)
        };
        prop_assert!(sd(w * factor, delta) <= sd(w, delta) + 1e-12);
        prop_assert!(sd(w, delta * factor) >= sd(w, delta) - 1e-12);
    }

    #[test]
    fn acquisitions_stay_in_the_box(
        xs in proptest::collection::vec(-5.0f64..5.0, 2..15),
        ys in proptest::collection::vec(-3.0f64..3.0, 15),
        lo in -4.0f64..0.0,
        width in 0.01f64..6.0,
        seed in 0u64..1000,
    ) {
        let hp = Hyperparams { signal_variance: 1.0, lengthscale: 0.7, noise_variance: 0.01 };
        let gp = GpSurrogate::condition(&xs, &ys[..xs.len()], hp, MaternOrder::FiveHalves, 1e-6).unwrap();
        let cfg = AcquisitionConfig::default();
        let x = acquire_marginal(&gp, (lo, lo + width), &cfg, &mut substream(&[seed])).unwrap();
        prop_assert!(x >= lo && x <= lo + width, "{x} outside [{lo}, {}]", lo + width);

        let space = ParameterSpace::new(vec!["a".into(), "b".into()], vec![lo, -1.0], vec![lo + width, 1.0]).unwrap();
        let gps = vec![gp.clone(), gp];
        for round in [0usize, 3, 12, 40] {
            let theta = acquire_round(Some(&gps), &space, &cfg, round, seed).unwrap();
            prop_assert!(space.contains(&theta), "{theta:?}");
        }
    }

    /// Training order does not change the posterior.
    #[test]
    fn gp_is_permutation_invariant(
        pts in proptest::collection::btree_map(0u32..300, -2.0f64..2.0, 2..12),
        shift in 1usize..11,
        q in -0.5f64..3.5,
    ) {
        let xs: Vec<f64> = pts.keys().map(|&k| k as f64 / 100.0).collect();
        let ys: Vec<f64> = pts.values().copied().collect();
        let n = xs.len();
        let order: Vec<usize> = (0..n).map(|i| (i * shift + 1) % n).collect();
        let mut seen = order.clone();
        seen.sort_unstable();
        seen.dedup();
        prop_assume!(seen.len() == n);
        let px: Vec<f64> = order.iter().map(|&i| xs[i]).collect();
        let py: Vec<f64> = order.iter().map(|&i| ys[i]).collect();
        let hp = Hyperparams { signal_variance: 1.3, lengthscale: 0.4, noise_variance: 0.05 };
        let a = GpSurrogate::condition(&xs, &ys, hp, MaternOrder::FiveHalves, 1e-6).unwrap().predict(q).unwrap();
        let b = GpSurrogate::condition(&px, &py, hp, MaternOrder::FiveHalves, 1e-6).unwrap().predict(q).unwrap();
        prop_assert!((a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9, "{a:?} vs {b:?}");
    }

    /// Coordinates draw from streams keyed by parameter name, so reordering
    /// the parameters reorders the acquisitions and nothing else.
    #[test]
    fn acquisition_is_parameter_order_invariant(seed in 0u64..1000, round in 0usize..30) {
        let names: Vec<String> = ["alpha", "beta", "gamma"].iter().map(|s| s.to_string()).collect();
        let lower = [0.0, -1.0, 2.0];
        let upper = [1.0, 1.0, 5.0];
        let space = ParameterSpace::new(names.clone(), lower.to_vec(), upper.to_vec()).unwrap();
        let perm = [2usize, 0, 1];
        let pspace = ParameterSpace::new(
            perm.iter().map(|&i| names[i].clone()).collect(),
            perm.iter().map(|&i| lower[i]).collect(),
            perm.iter().map(|&i| upper[i]).collect(),
        ).unwrap();
        let hp = Hyperparams { signal_variance: 1.0, lengthscale: 0.5, noise_variance: 0.01 };
        let gps: Vec<GpSurrogate> = (0..3)
            .map(|j| {
                let xs = linspace(lower[j], upper[j], 6);
                let ys: Vec<f64> = xs.iter().map(|x| (x - lower[j] - 0.3 * j as f64).powi(2)).collect();
                GpSurrogate::condition(&xs, &ys, hp, MaternOrder::FiveHalves, 1e-6).unwrap()
            })
            .collect();
        let pgps: Vec<GpSurrogate> = perm.iter().map(|&i| gps[i].clone()).collect();
        let cfg = AcquisitionConfig::default();
        let a = acquire_round(Some(&gps), &space, &cfg, round, seed).unwrap();
        let b = acquire_round(Some(&pgps), &pspace, &cfg, round, seed).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            prop_assert_eq!(a[i], b[k]);
        }
    }
}
