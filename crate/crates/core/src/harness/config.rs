use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::SplitBolfiConfig;
use crate::error::{Error, Result};
use crate::proxy::DEFAULT_GRID_POINTS;
use crate::simulators::daycare::{
    strains_for_dim, DaycareModel, Integrator, DEFAULT_CHILDREN, DEFAULT_OBSERVATIONS, DEFAULT_TRUE_BETA,
    DEFAULT_TRUE_LAMBDA,
};
use crate::simulators::gaussian;
use crate::simulators::gvar::{GvarDynamics, NoiseSummary, DEFAULT_SIGMA2, DEFAULT_STEPS};
use crate::simulators::{DiscrepancyNorm, GroupAggregation};

/// Lengthscale held fixed for daycare surrogates unless `[engine]` says otherwise.
pub const DAYCARE_LENGTHSCALE: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Gaussian,
    Gvar,
    Daycare,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Gaussian => "gaussian",
            ModelKind::Gvar => "gvar",
            ModelKind::Daycare => "daycare",
        }
    }

    /// Parameter dimensions of the desk-scale sweep.
    pub fn desk_dims(self) -> Vec<usize> {
        match self {
            ModelKind::Gaussian => vec![5, 10, 25],
            ModelKind::Gvar => vec![6, 21],
            ModelKind::Daycare => vec![8],
        }
    }

    /// Parameter dimensions used with `--full-scale`.
    pub fn full_scale_dims(self) -> Vec<usize> {
        match self {
            ModelKind::Gaussian => vec![5, 10, 50, 100],
            ModelKind::Gvar => vec![6, 21, 101],
            ModelKind::Daycare => vec![30],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbcSection {
    pub q: Vec<f64>,
    pub n_samples: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaussianSection {
    /// Observations per simulated data set.
    pub n_samples: usize,
    pub prior: [f64; 2],
}

impl Default for GaussianSection {
    fn default() -> Self {
        Self { n_samples: gaussian::DEFAULT_SAMPLES, prior: [gaussian::DEFAULT_PRIOR.0, gaussian::DEFAULT_PRIOR.1] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GvarSection {
    pub t_steps: usize,
    pub sigma2: f64,
    pub dynamics: GvarDynamics,
    pub noise_summary: NoiseSummary,
}

impl Default for GvarSection {
    fn default() -> Self {
        Self {
            t_steps: DEFAULT_STEPS,
            sigma2: DEFAULT_SIGMA2,
            dynamics: GvarDynamics::default(),
            noise_summary: NoiseSummary::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DaycareSection {
    pub n_children: usize,
    pub n_observations: usize,
    pub dt: f64,
    pub burn_in: f64,
    pub snapshot_interval: f64,
    pub integrator: Integrator,
    pub aggregation: GroupAggregation,
    /// Synthetic truth.
    pub beta: f64,
    pub lambda: f64,
    pub competitive_pairs: Vec<[usize; 2]>,
    pub competition: f64,
}

impl Default for DaycareSection {
    fn default() -> Self {
        Self {
            n_children: DEFAULT_CHILDREN,
            n_observations: DEFAULT_OBSERVATIONS,
            dt: 0.1,
            burn_in: 50.0,
            snapshot_interval: 5.0,
            integrator: Integrator::default(),
            aggregation: GroupAggregation::default(),
            beta: DEFAULT_TRUE_BETA,
            lambda: DEFAULT_TRUE_LAMBDA,
            competitive_pairs: vec![[0, 1]],
            competition: 2.0,
        }
    }
}

impl DaycareSection {
    /// Model template for `n_strains`; β, Λ and θ are overwritten per simulation.
    pub fn template(&self, n_strains: usize) -> DaycareModel {
        let mut m = DaycareModel::new(n_strains, self.beta, self.lambda);
        m.n_children = self.n_children;
        m.n_observations = self.n_observations;
        m.dt = self.dt;
        m.burn_in = self.burn_in;
        m.snapshot_interval = self.snapshot_interval;
        m.integrator = self.integrator;
        m
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.competitive_pairs.iter().map(|p| (p[0], p[1])).collect()
    }
}

fn default_grid_points() -> usize {
    DEFAULT_GRID_POINTS
}

fn default_workers() -> usize {
    1
}

/// One experiment sweep. `dims` counts inferred parameters for every model,
/// so a 4-strain daycare model has dimension 8.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub dims: Vec<usize>,
    pub n_acq: Vec<usize>,
    pub w_values: Vec<f64>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// Observed summaries (or daycare snapshots) replacing the synthetic data.
    #[serde(default)]
    pub data_file: Option<PathBuf>,
    #[serde(default)]
    pub abc: Option<AbcSection>,
    #[serde(default)]
    pub norm: DiscrepancyNorm,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Also write every proxy density grid next to the moments.
    #[serde(default)]
    pub write_proxies: bool,
    #[serde(default)]
    pub engine: Option<SplitBolfiConfig>,
    #[serde(default)]
    pub gaussian: GaussianSection,
    #[serde(default)]
    pub gvar: GvarSection,
    #[serde(default)]
    pub daycare: DaycareSection,
}

impl ExperimentConfig {
    /// A config with default sections for `model`.
    pub fn new(model: ModelKind, dims: Vec<usize>, n_acq: Vec<usize>, w_values: Vec<f64>, seeds: Vec<u64>) -> Self {
        Self {
            model,
            dims,
            n_acq,
            w_values,
            seeds,
            output_dir: PathBuf::from("results"),
            data_file: None,
            abc: None,
            norm: DiscrepancyNorm::default(),
            grid_points: DEFAULT_GRID_POINTS,
            workers: 1,
            write_proxies: false,
            engine: None,
            gaussian: GaussianSection::default(),
            gvar: GvarSection::default(),
            daycare: DaycareSection::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file. A relative `data_file` is resolved against the
    /// config's directory.
    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut config = Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        if let (Some(data), Some(dir)) = (&config.data_file, path.parent()) {
            if data.is_relative() {
                config.data_file = Some(dir.join(data));
            }
        }
        Ok(config)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// The engine settings, with the daycare lengthscale fixed when no
    /// `[engine]` section is given.
    pub fn engine_config(&self) -> SplitBolfiConfig {
        self.engine.clone().unwrap_or_else(|| {
            let mut c = SplitBolfiConfig::default();
            if self.model == ModelKind::Daycare {
                c.kernel.lengthscale_fixed = Some(DAYCARE_LENGTHSCALE);
            }
            c
        })
    }

    /// Budgets in increasing order.
    pub fn budgets(&self) -> Vec<usize> {
        let mut b = self.n_acq.clone();
        b.sort_unstable();
        b
    }

    pub fn apply_seed_offset(&mut self, offset: u64) {
        for s in &mut self.seeds {
            *s = s.wrapping_add(offset);
        }
    }

    pub fn apply_full_scale(&mut self) {
        self.dims = self.model.full_scale_dims();
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        for (name, empty) in [
            ("dims", self.dims.is_empty()),
            ("n_acq", self.n_acq.is_empty()),
            ("w_values", self.w_values.is_empty()),
            ("seeds", self.seeds.is_empty()),
        ] {
            if empty {
                return bad(format!("`{name}` must not be empty"));
            }
        }
        if self.seeds.iter().collect::<HashSet<_>>().len() != self.seeds.len() {
            return bad("`seeds` must be distinct".into());
        }
        if self.dims.iter().collect::<HashSet<_>>().len() != self.dims.len() {
            return bad("`dims` must be distinct".into());
        }
        if self.n_acq.iter().collect::<HashSet<_>>().len() != self.n_acq.len() {
            return bad("`n_acq` must be distinct".into());
        }
        let engine = self.engine_config();
        engine.validate()?;
        let n_init = engine.acquisition.n_init;
        if let Some(&n) = self.n_acq.iter().find(|&&n| n < n_init) {
            return bad(format!("`n_acq` entry {n} is below the {n_init} initial design points"));
        }
        if let Some(w) = self.w_values.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return bad(format!("`w_values` entries must be positive, got {w}"));
        }
        if self.grid_points < 2 {
            return bad("`grid_points` must be at least 2".into());
        }
        if self.workers == 0 {
            return bad("`workers` must be at least 1".into());
        }
        if self.data_file.is_some() && self.dims.len() != 1 {
            return bad("`data_file` fixes the dimension, so `dims` must have exactly one entry".into());
        }
        for &d in &self.dims {
            self.check_dim(d)?;
        }
        if let Some(abc) = &self.abc {
            if abc.q.is_empty() || abc.n_samples.is_empty() {
                return bad("`abc.q` and `abc.n_samples` must not be empty".into());
            }
            if let Some(q) = abc.q.iter().find(|q| !(**q > 0.0 && **q <= 1.0)) {
                return bad(format!("`abc.q` entries must lie in (0, 1], got {q}"));
            }
            if abc.n_samples.contains(&0) {
                return bad("`abc.n_samples` entries must be at least 1".into());
            }
        }
        self.check_sections()
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        let ok = match self.model {
            ModelKind::Gaussian => d >= 1,
            ModelKind::Gvar => d >= 3,
            ModelKind::Daycare => strains_for_dim(d).is_some_and(|s| s >= 2),
        };
        if ok {
            Ok(())
        } else {
            let hint = match self.model {
                ModelKind::Gaussian => "at least 1",
                ModelKind::Gvar => "at least 3 (two coupled variables plus the noise variance)",
                ModelKind::Daycare => "s(s-1)/2 + 2 for some strain count s >= 2, e.g. 3, 5, 8, 12",
            };
            Err(Error::Config(format!("dimension {d} is invalid for {}: must be {hint}", self.model.as_str())))
        }
    }

    fn check_sections(&self) -> Result<()> {
        let g = &self.gaussian;
        if g.n_samples == 0 || !(g.prior[0].is_finite() && g.prior[1].is_finite() && g.prior[0] < g.prior[1]) {
            return Err(Error::Config("`gaussian` needs n_samples >= 1 and prior lower < upper".into()));
        }
        let v = &self.gvar;
        if v.t_steps < 3 || !(v.sigma2.is_finite() && v.sigma2 > 0.0) {
            return Err(Error::Config("`gvar` needs t_steps >= 3 and a positive sigma2".into()));
        }
        let c = &self.daycare;
        let positive = [("dt", c.dt), ("snapshot_interval", c.snapshot_interval)];
        if let Some((name, _)) = positive.iter().find(|(_, x)| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::Config(format!("`daycare.{name}` must be positive")));
        }
        if !(c.burn_in >= 0.0 && c.beta >= 0.0 && c.lambda >= 0.0 && c.competition >= 0.0) {
            return Err(Error::Config("`daycare` burn_in, beta, lambda and competition must be non-negative".into()));
        }
        if c.n_children == 0 || c.n_observations == 0 {
            return Err(Error::Config("`daycare` needs at least one child and one observation".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
model = "gaussian"
dims = [5]
n_acq = [50]
w_values = [1.0]
seeds = [0, 1]
output_dir = "out"
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let c = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(c.grid_points, DEFAULT_GRID_POINTS);
        assert_eq!(c.gaussian.n_samples, 100);
        assert_eq!(c.engine_config(), SplitBolfiConfig::default());
        let back = ExperimentConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = ExperimentConfig::from_toml_str(&format!("{MINIMAL}\nbogus_key = 3\n")).unwrap_err();
        assert!(err.to_string().contains("bogus_key"), "{err}");
        let err = ExperimentConfig::from_toml_str(&format!("{MINIMAL}\n[gvar]\nsteps = 3\n")).unwrap_err();
        assert!(err.to_string().contains("steps"), "{err}");
    }

    #[test]
    fn invalid_sequences_rejected() {
        for (from, to) in [
            ("seeds = [0, 1]", "seeds = [1, 1]"),
            ("seeds = [0, 1]", "seeds = []"),
            ("n_acq = [50]", "n_acq = [5]"),
            ("w_values = [1.0]", "w_values = [0.0]"),
        ] {
            let text = MINIMAL.replace(from, to);
            assert!(ExperimentConfig::from_toml_str(&text).is_err(), "{to}");
        }
    }

    #[test]
    fn daycare_dims_and_engine_default() {
        let text = MINIMAL.replace("\"gaussian\"", "\"daycare\"").replace("dims = [5]", "dims = [8]");
        let c = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(c.engine_config().kernel.lengthscale_fixed, Some(DAYCARE_LENGTHSCALE));
        assert!(ExperimentConfig::from_toml_str(&text.replace("dims = [8]", "dims = [7]")).is_err());
    }

    #[test]
    fn seed_offset_and_full_scale() {
        let mut c = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        c.apply_seed_offset(10);
        assert_eq!(c.seeds, vec![10, 11]);
        c.apply_full_scale();
        assert_eq!(c.dims, vec![5, 10, 50, 100]);
    }
}
