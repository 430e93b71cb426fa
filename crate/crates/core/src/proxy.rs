//! Exponentiated-loss marginal posterior proxies.
//!
//! For parameter j the proxy density on a grid over its prior support is
//! proportional to exp(−(w/δ_j)·μ_j(θ_j)), where μ_j is the surrogate's
//! predictive mean and δ_j the tempering scale. The joint proxy is the product
//! of the marginals.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::gp::GpSurrogate;
use crate::optim::{argmin, linspace};

pub const DEFAULT_GRID_POINTS: usize = 512;
/// Lower bound on the tempering scale.
pub const DELTA_FLOOR: f64 = 1e-8;
/// Density floor inside the KL logarithms.
pub const DENSITY_FLOOR: f64 = 1e-300;

/// Trapezoid-rule integral of `values` sampled at `grid`.
pub fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    grid.windows(2)
        .zip(values.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperingScale {
    pub value: f64,
    /// True when both minima were at or below the floor.
    pub floored: bool,
}

/// δ = max(d_min, d_obs_min) when d_min > 0, otherwise d_obs_min; floored at
/// [`DELTA_FLOOR`].
pub fn tempering_scale(d_min: f64, d_obs_min: f64) -> Result<TemperingScale> {
    ensure_finite(d_obs_min, "minimum observed discrepancy")?;
    let raw = if d_min.is_finite() && d_min > 0.0 { d_min.max(d_obs_min) } else { d_obs_min };
    if raw > DELTA_FLOOR {
        Ok(TemperingScale { value: raw, floored: false })
    } else {
        Ok(TemperingScale { value: DELTA_FLOOR, floored: true })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalProxy {
    pub grid: Vec<f64>,
    pub mu: Vec<f64>,
    pub delta: f64,
    pub w: f64,
    pub density: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProxyMoments {
    pub mean: f64,
    pub mode: f64,
    pub sd: f64,
}

fn check_tempering(w: f64, delta: f64) -> Result<()> {
    if !(w.is_finite() && w > 0.0) {
        return Err(Error::InvalidInput(format!("tempering weight w must be positive, got {w}")));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidInput(format!("tempering scale must be positive, got {delta}")));
    }
    Ok(())
}

/// Normalise `raw` to unit trapezoid mass on `grid`.
fn normalize(grid: &[f64], mut raw: Vec<f64>) -> Result<Vec<f64>> {
    let z = trapezoid(grid, &raw);
    if !(z.is_finite() && z > 0.0) {
        return Err(Error::InvalidInput(format!("proxy has non-positive mass {z}")));
    }
    raw.iter_mut().for_each(|v| *v /= z);
    Ok(raw)
}

/// Proxy from a predictive-mean profile already evaluated on `grid`.
pub fn build_proxy_from_mean(grid: Vec<f64>, mu: Vec<f64>, w: f64, delta: f64) -> Result<MarginalProxy> {
    check_tempering(w, delta)?;
    if grid.len() != mu.len() || grid.len() < 2 {
        return Err(Error::GridMismatch(format!("grid of {} points with {} mean values", grid.len(), mu.len())));
    }
    if let Some(v) = mu.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("predictive mean must be finite, got {v}")));
    }
    // Shifting by the minimum leaves the normalised density unchanged.
    let floor = mu.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = w / delta;
    let raw = mu.iter().map(|m| (-scale * (m - floor)).exp()).collect();
    let density = normalize(&grid, raw)?;
    Ok(MarginalProxy { grid, mu, delta, w, density })
}

pub fn build_proxy(gp: &GpSurrogate, support: (f64, f64), w: f64, delta: f64, grid_points: usize) -> Result<MarginalProxy> {
    let (lo, hi) = support;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) || grid_points < 2 {
        return Err(Error::InvalidInput(format!("proxy needs a bounded support and >= 2 grid points, got [{lo}, {hi}] / {grid_points}")));
    }
    let grid = linspace(lo, hi, grid_points);
    let mu = grid.iter().map(|&x| gp.predict_mean_unchecked(x)).collect();
    build_proxy_from_mean(grid, mu, w, delta)
}

impl MarginalProxy {
    /// Multiply by non-uniform prior weights on the grid and renormalise.
    pub fn with_prior(mut self, prior: &[f64]) -> Result<Self> {
        if prior.len() != self.grid.len() {
            return Err(Error::GridMismatch(format!("{} prior weights for {} grid points", prior.len(), self.grid.len())));
        }
        if prior.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidInput("prior weights must be finite and non-negative".into()));
        }
        let raw = self.density.iter().zip(prior).map(|(d, p)| d * p).collect();
        self.density = normalize(&self.grid, raw)?;
        Ok(self)
    }

    pub fn moments(&self) -> ProxyMoments {
        proxy_moments(self)
    }

    /// Probability mass below `x`, by trapezoid with linear interpolation of
    /// the density at the cut.
    pub fn mass_below(&self, x: f64) -> f64 {
        let mut mass = 0.0;
        for (g, d) in self.grid.windows(2).zip(self.density.windows(2)) {
            if g[1] <= x {
                mass += 0.5 * (g[1] - g[0]) * (d[0] + d[1]);
            } else if g[0] < x {
                let t = (x - g[0]) / (g[1] - g[0]);
                let dx = d[0] + t * (d[1] - d[0]);
                mass += 0.5 * (x - g[0]) * (d[0] + dx);
            }
        }
        mass
    }
}

/// Mean and sd by trapezoid quadrature; mode is the grid argmax with ties to
/// the lowest coordinate.
pub fn proxy_moments(proxy: &MarginalProxy) -> ProxyMoments {
    let g = &proxy.grid;
    let p = &proxy.density;
    let mean = trapezoid(g, &g.iter().zip(p).map(|(x, d)| x * d).collect::<Vec<_>>());
    let var = trapezoid(g, &g.iter().zip(p).map(|(x, d)| (x - mean).powi(2) * d).collect::<Vec<_>>());
    let neg: Vec<f64> = p.iter().map(|d| -d).collect();
    let mode = argmin(&neg).map_or(f64::NAN, |i| g[i]);
    ProxyMoments { mean, mode, sd: var.max(0.0).sqrt() }
}

/// KL(p‖q) + KL(q‖p) for two densities on a common grid.
pub fn symmetrized_kl(grid: &[f64], p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != grid.len() || q.len() != grid.len() {
        return Err(Error::GridMismatch(format!("grid has {} points, densities {} and {}", grid.len(), p.len(), q.len())));
    }
    let integrand: Vec<f64> = p
        .iter()
        .zip(q)
        .map(|(&a, &b)| {
            let (a, b) = (a.max(DENSITY_FLOOR), b.max(DENSITY_FLOOR));
            (a - b) * (a.ln() - b.ln())
        })
        .collect();
    Ok(trapezoid(grid, &integrand).max(0.0))
}

/// Symmetrised KL between two proxies, which must share a grid.
pub fn proxy_symmetrized_kl(a: &MarginalProxy, b: &MarginalProxy) -> Result<f64> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch("proxies are defined on different grids".into()));
    }
    symmetrized_kl(&a.grid, &a.density, &b.density)
}

/// Columns theta, mu, density.
pub fn write_proxy_csv<P: AsRef<Path>>(path: P, proxy: &MarginalProxy) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["theta", "mu", "density"])?;
    for ((t, m), d) in proxy.grid.iter().zip(&proxy.mu).zip(&proxy.density) {
        w.write_record([t.to_string(), m.to_string(), d.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns parameter, mean, mode, sd, delta, w.
pub fn write_moments_csv<P: AsRef<Path>>(path: P, names: &[String], proxies: &[MarginalProxy]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["parameter", "mean", "mode", "sd", "delta", "w"])?;
    for (name, p) in names.iter().zip(proxies) {
        let m = p.moments();
        w.write_record([name.clone(), m.mean.to_string(), m.mode.to_string(), m.sd.to_string(), p.delta.to_string(), p.w.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
