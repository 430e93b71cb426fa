use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cell::{build_problem, evaluate_abc_cell, evaluate_fit, simulate_observed, AbcMetrics, CellMetrics};
use super::config::ExperimentConfig;
use crate::engine::{run_split_bolfi_with_checkpoints, FitResult};
use crate::error::{Error, Result};
use crate::proxy::{write_moments_csv, MarginalProxy};
use crate::simulators::io::{write_snapshots_csv, write_summary_csv};

/// Column order of `summary.csv`.
pub const SUMMARY_COLUMNS: [&str; 10] =
    ["model", "dim", "n_acq", "w", "n_seeds", "sim_calls", "rmse_gen", "rmse_post", "sd", "skl"];
/// Column order of `abc_summary.csv`.
pub const ABC_SUMMARY_COLUMNS: [&str; 8] = ["model", "dim", "q", "n_samples", "budget", "n_seeds", "rmse_gen", "sd"];
/// Column order of `dump-proxy` output.
pub const DUMP_COLUMNS: [&str; 5] = ["theta", "gp_mean", "gp_sd", "proxy_density", "acquisition_points"];

/// What a sweep did; `failed` cells are missing from the summary.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub computed: usize,
    pub resumed: usize,
    pub failed: Vec<FailedCell>,
    pub summary: PathBuf,
}

impl SweepOutcome {
    pub fn is_complete(&self) -> bool {
        self.failed.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedCell {
    pub dim: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    config: &'a ExperimentConfig,
    started_unix: f64,
    elapsed_seconds: f64,
    outcome: &'a SweepOutcome,
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// Writes `contents` next to `path` and renames it into place, so readers
/// never see a half-written file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

fn cell_dir(root: &Path, dim: usize, seed: u64) -> PathBuf {
    root.join("cells").join(format!("dim{dim}")).join(format!("seed{seed}"))
}

fn abc_cell_path(root: &Path, dim: usize, seed: u64) -> PathBuf {
    root.join("abc_cells").join(format!("dim{dim}_seed{seed}.csv"))
}

fn format_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Mean over the present values; absent if any value is missing.
fn mean_opt(values: &[Option<f64>]) -> Option<f64> {
    let present: Option<Vec<f64>> = values.iter().copied().collect();
    present.filter(|v| !v.is_empty()).map(|v| v.iter().sum::<f64>() / v.len() as f64)
}

fn run_cells<T, F>(config: &ExperimentConfig, work: F) -> Result<Vec<(usize, u64, Result<T>)>>
where
    T: Send,
    F: Fn(usize, u64) -> Result<T> + Sync,
{
    let cells: Vec<(usize, u64)> =
        config.dims.iter().flat_map(|&d| config.seeds.iter().map(move |&s| (d, s))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", config.workers)))?;
    Ok(pool.install(|| cells.par_iter().map(|&(d, s)| (d, s, work(d, s))).collect()))
}

fn expected_grid(config: &ExperimentConfig) -> BTreeSet<(usize, u64)> {
    config.n_acq.iter().flat_map(|&n| config.w_values.iter().map(move |w| (n, w.to_bits()))).collect()
}

/// Loads a finished cell if it covers exactly the configured (n_acq, w) grid.
fn load_cell(config: &ExperimentConfig, dir: &Path) -> Option<Vec<CellMetrics>> {
    let rows: Vec<CellMetrics> = read_rows(&dir.join("metrics.csv")).ok()?;
    let got: BTreeSet<(usize, u64)> = rows.iter().map(|r| (r.n_acq, r.w.to_bits())).collect();
    (got == expected_grid(config) && got.len() == rows.len()).then_some(rows)
}

fn compute_cell(config: &ExperimentConfig, dim: usize, seed: u64, dir: &Path) -> Result<Vec<CellMetrics>> {
    let problem = build_problem(config, dim, seed)?;
    let fits = run_split_bolfi_with_checkpoints(&problem.spec, &config.budgets(), &config.engine_config(), seed)?;
    fs::create_dir_all(dir)?;
    let names = problem.spec.space().names().to_vec();
    let mut rows = Vec::new();
    for fit in &fits {
        write_atomic(&dir.join(format!("fit_n{}.json", fit.n_acq)), fit.to_json()?.as_bytes())?;
        for &w in &config.w_values {
            let (m, proxies) = evaluate_fit(&problem, fit, w, config.grid_points)?;
            let tag = format!("n{}_w{w}", fit.n_acq);
            let moments = dir.join(format!("moments_{tag}.csv"));
            write_moments_csv(&moments, &names, &proxies)?;
            if config.write_proxies {
                write_atomic(&dir.join(format!("proxies_{tag}.csv")), &proxy_grid_bytes(&names, &proxies)?)?;
            }
            rows.push(m);
        }
    }
    // The metrics file marks the cell as complete, so it is written last.
    write_atomic(&dir.join("metrics.csv"), &csv_bytes(&rows)?)?;
    Ok(rows)
}

fn proxy_grid_bytes(names: &[String], proxies: &[MarginalProxy]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["parameter", "theta", "mu", "density"])?;
    for (name, p) in names.iter().zip(proxies) {
        for i in 0..p.grid.len() {
            w.write_record([name.clone(), p.grid[i].to_string(), p.mu[i].to_string(), p.density[i].to_string()])?;
        }
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn write_manifest(root: &Path, command: &str, config: &ExperimentConfig, started: f64, clock: Instant, outcome: &SweepOutcome) -> Result<()> {
    let manifest = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        config,
        started_unix: started,
        elapsed_seconds: clock.elapsed().as_secs_f64(),
        outcome,
    };
    write_atomic(&root.join(format!("manifest_{command}.json")), serde_json::to_string_pretty(&manifest)?.as_bytes())
}

/// Runs every (dim, seed) cell, reusing finished cells, then aggregates
/// `summary.csv` with one row per (dim, n_acq, w) in config order.
pub fn cmd_run(config: &ExperimentConfig) -> Result<SweepOutcome> {
    config.validate()?;
    let (started, clock) = (unix_now(), Instant::now());
    let root = &config.output_dir;
    fs::create_dir_all(root)?;
    let results = run_cells(config, |dim, seed| {
        let dir = cell_dir(root, dim, seed);
        if let Some(rows) = load_cell(config, &dir) {
            info!("dim {dim} seed {seed}: reusing finished cell");
            return Ok((rows, true));
        }
        info!("dim {dim} seed {seed}: running");
        compute_cell(config, dim, seed, &dir).map(|rows| (rows, false))
    })?;

    let mut outcome = SweepOutcome { summary: root.join("summary.csv"), ..Default::default() };
    let mut done = Vec::new();
    for (dim, seed, r) in results {
        match r {
            Ok((rows, resumed)) => {
                if resumed {
                    outcome.resumed += 1;
                } else {
                    outcome.computed += 1;
                }
                done.push((dim, rows));
            }
            Err(e) => {
                warn!("dim {dim} seed {seed} failed: {e}");
                outcome.failed.push(FailedCell { dim, seed, error: e.to_string() });
            }
        }
    }

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SUMMARY_COLUMNS)?;
    for &dim in &config.dims {
        for &n in &config.n_acq {
            for &wv in &config.w_values {
                let cell: Vec<&CellMetrics> = done
                    .iter()
                    .filter(|(d, _)| *d == dim)
                    .flat_map(|(_, rows)| rows.iter().filter(|r| r.n_acq == n && r.w.to_bits() == wv.to_bits()))
                    .collect();
                if cell.is_empty() {
                    continue;
                }
                let k = cell.len() as f64;
                let sim_calls = cell.iter().map(|r| r.sim_calls as f64).sum::<f64>() / k;
                let col = |f: fn(&CellMetrics) -> Option<f64>| format_opt(mean_opt(&cell.iter().map(|r| f(r)).collect::<Vec<_>>()));
                w.write_record([
                    config.model.as_str().to_string(),
                    dim.to_string(),
                    n.to_string(),
                    wv.to_string(),
                    cell.len().to_string(),
                    sim_calls.to_string(),
                    col(|r| r.rmse_gen),
                    col(|r| r.rmse_post),
                    col(|r| Some(r.sd)),
                    col(|r| r.skl),
                ])?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(&outcome.summary, &bytes)?;
    write_manifest(root, "run", config, started, clock, &outcome)?;
    Ok(outcome)
}

/// Marginal ABC over the `[abc]` grid; `abc_summary.csv` has one row per
/// (dim, q, n_samples) in config order.
pub fn cmd_abc(config: &ExperimentConfig) -> Result<SweepOutcome> {
    config.validate()?;
    let abc = config.abc.as_ref().ok_or_else(|| Error::Config("the `abc` section is missing".into()))?;
    let (started, clock) = (unix_now(), Instant::now());
    let root = &config.output_dir;
    fs::create_dir_all(root.join("abc_cells"))?;
    let expected: BTreeSet<(u64, usize)> =
        abc.q.iter().flat_map(|q| abc.n_samples.iter().map(move |&n| (q.to_bits(), n))).collect();
    let results = run_cells(config, |dim, seed| {
        let path = abc_cell_path(root, dim, seed);
        if let Ok(rows) = read_rows::<AbcMetrics>(&path) {
            let got: BTreeSet<(u64, usize)> = rows.iter().map(|r| (r.q.to_bits(), r.n_samples)).collect();
            if got == expected && got.len() == rows.len() {
                return Ok((rows, true));
            }
        }
        info!("abc dim {dim} seed {seed}: running");
        let rows = evaluate_abc_cell(config, dim, seed)?;
        write_atomic(&path, &csv_bytes(&rows)?)?;
        Ok((rows, false))
    })?;

    let mut outcome = SweepOutcome { summary: root.join("abc_summary.csv"), ..Default::default() };
    let mut done = Vec::new();
    for (dim, seed, r) in results {
        match r {
            Ok((rows, resumed)) => {
                if resumed {
                    outcome.resumed += 1;
                } else {
                    outcome.computed += 1;
                }
                done.push((dim, rows));
            }
            Err(e) => outcome.failed.push(FailedCell { dim, seed, error: e.to_string() }),
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(ABC_SUMMARY_COLUMNS)?;
    for &dim in &config.dims {
        for &q in &abc.q {
            for &n in &abc.n_samples {
                let cell: Vec<&AbcMetrics> = done
                    .iter()
                    .filter(|(d, _)| *d == dim)
                    .flat_map(|(_, rows)| rows.iter().filter(|r| r.q.to_bits() == q.to_bits() && r.n_samples == n))
                    .collect();
                if cell.is_empty() {
                    continue;
                }
                let rmse = mean_opt(&cell.iter().map(|r| r.rmse_gen).collect::<Vec<_>>());
                let sd = mean_opt(&cell.iter().map(|r| r.sd).collect::<Vec<_>>());
                w.write_record([
                    config.model.as_str().to_string(),
                    dim.to_string(),
                    q.to_string(),
                    n.to_string(),
                    cell[0].budget.to_string(),
                    cell.len().to_string(),
                    format_opt(rmse),
                    format_opt(sd),
                ])?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(&outcome.summary, &bytes)?;
    write_manifest(root, "abc", config, started, clock, &outcome)?;
    Ok(outcome)
}

/// Grid dump of one parameter of a saved fit. Rows run to the longer of the
/// grid and the acquisition list; the shorter columns are left blank.
pub fn cmd_dump_proxy(fit_file: &Path, parameter: &str, w: f64, grid_points: usize, out: &Path) -> Result<()> {
    let fit = FitResult::from_json(&fs::read_to_string(fit_file)?)?;
    let j = fit.space.index_of(parameter).ok_or_else(|| Error::UnknownParameter(parameter.to_string()))?;
    let proxy = fit.proxy(j, w, grid_points)?;
    let gp = fit.surrogates[j].predict_many(&proxy.grid)?;
    let (acquisitions, _) = fit.log.column(j);
    let rows = proxy.grid.len().max(acquisitions.len());
    let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut wr = csv::Writer::from_writer(Vec::new());
    wr.write_record(DUMP_COLUMNS)?;
    for i in 0..rows {
        wr.write_record([
            cell(proxy.grid.get(i).copied()),
            cell(gp.get(i).map(|g| g.0)),
            cell(gp.get(i).map(|g| g.1.max(0.0).sqrt())),
            cell(proxy.density.get(i).copied()),
            cell(acquisitions.get(i).copied()),
        ])?;
    }
    let bytes = wr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    write_atomic(out, &bytes)
}

/// Writes `summaries.csv` (and `snapshots.csv` for daycare) under `out_dir`,
/// plus `parameters.csv` with the θ used. Returns the written paths.
pub fn cmd_simulate(config: &ExperimentConfig, dim: usize, seed: u64, theta: Option<&[f64]>, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let data = simulate_observed(config, dim, seed, theta)?;
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let params = out_dir.join("parameters.csv");
    write_summary_csv(&params, &data.parameter_names, &data.theta)?;
    written.push(params);
    let summaries = out_dir.join("summaries.csv");
    write_summary_csv(&summaries, &data.summary_names, &data.summaries)?;
    written.push(summaries);
    if let Some(snaps) = &data.snapshots {
        let n_strains = snaps.first().map_or(0, |s| s.n_strains());
        let strain_names: Vec<String> = (0..n_strains).map(|s| format!("strain_{s}")).collect();
        let path = out_dir.join("snapshots.csv");
        write_snapshots_csv(&path, &strain_names, snaps)?;
        written.push(path);
    }
    Ok(written)
}
