//! Sweeps, resume, proxy dumps and data files through the harness commands.

use std::fs;
use std::path::Path;

use splitbolfi::error::Error;
use splitbolfi::harness::{
    build_problem, cmd_abc, cmd_dump_proxy, cmd_run, cmd_simulate, AbcSection, ExperimentConfig, ModelKind, DUMP_COLUMNS,
    SUMMARY_COLUMNS,
};
use splitbolfi::proxy::trapezoid;

fn small_gaussian(out: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(ModelKind::Gaussian, vec![2, 3], vec![12, 20], vec![1.0, 0.5], vec![0, 1, 2]);
    c.output_dir = out.to_path_buf();
    c.workers = 3;
    c.abc = Some(AbcSection { q: vec![0.1, 0.05], n_samples: vec![1, 2] });
    c
}

#[test]
fn summary_is_byte_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ca = small_gaussian(a.path());
    let mut cb = small_gaussian(b.path());
    cb.workers = 1;
    let (oa, ob) = (cmd_run(&ca).unwrap(), cmd_run(&cb).unwrap());
    assert!(oa.is_complete() && ob.is_complete());
    assert_eq!(oa.computed, 6);
    let (sa, sb) = (fs::read(&oa.summary).unwrap(), fs::read(&ob.summary).unwrap());
    assert_eq!(sa, sb);

    let text = String::from_utf8(sa).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), SUMMARY_COLUMNS.join(","));
    // 2 dims x 2 budgets x 2 weights, each averaged over 3 seeds.
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| r.split(',').nth(4) == Some("3")));
    assert!(rows[0].starts_with("gaussian,2,12,1,3,12,"), "{}", rows[0]);

    let (xa, xb) = (cmd_abc(&ca).unwrap(), cmd_abc(&cb).unwrap());
    assert_eq!(fs::read(&xa.summary).unwrap(), fs::read(&xb.summary).unwrap());
}

#[test]
fn resume_reuses_finished_cells_once() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_gaussian(dir.path());
    let first = cmd_run(&config).unwrap();
    let reference = fs::read(&first.summary).unwrap();

    // An interrupted cell has fits but no metrics file.
    fs::remove_file(dir.path().join("cells/dim3/seed1/metrics.csv")).unwrap();
    let second = cmd_run(&config).unwrap();
    assert_eq!((second.computed, second.resumed), (1, 5));
    assert_eq!(fs::read(&second.summary).unwrap(), reference);

    let third = cmd_run(&config).unwrap();
    assert_eq!((third.computed, third.resumed), (0, 6));
    assert_eq!(fs::read(&third.summary).unwrap(), reference);

    // A changed grid invalidates the stored cells instead of mixing them in.
    let mut wider = config.clone();
    wider.w_values.push(2.0);
    assert_eq!(cmd_run(&wider).unwrap().computed, 6);

    let abc1 = cmd_abc(&config).unwrap();
    let abc2 = cmd_abc(&config).unwrap();
    assert_eq!((abc2.computed, abc2.resumed), (0, 6));
    assert_eq!(fs::read(&abc1.summary).unwrap(), fs::read(&abc2.summary).unwrap());
}

fn read_dump(path: &Path) -> Vec<Vec<Option<f64>>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    assert_eq!(r.headers().unwrap().iter().collect::<Vec<_>>(), DUMP_COLUMNS);
    r.records()
        .map(|rec| rec.unwrap().iter().map(|v| (!v.is_empty()).then(|| v.parse().unwrap())).collect())
        .collect()
}

/// A 1-D Gaussian fit at 250 acquisitions peaks at the sample mean, and the
/// dumped density integrates to one.
#[test]
fn dumped_proxy_peaks_at_sample_mean() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = ExperimentConfig::new(ModelKind::Gaussian, vec![1], vec![250], vec![1.0], vec![4]);
    config.output_dir = dir.path().to_path_buf();
    cmd_run(&config).unwrap();
    let fit = dir.path().join("cells/dim1/seed4/fit_n250.json");
    let out = dir.path().join("dump/mu_0.csv");
    cmd_dump_proxy(&fit, "mu_0", 1.0, 512, &out).unwrap();

    let rows = read_dump(&out);
    assert_eq!(rows.len(), 512);
    assert_eq!(rows.iter().filter(|r| r[4].is_some()).count(), 250);
    let theta: Vec<f64> = rows.iter().map(|r| r[0].unwrap()).collect();
    let density: Vec<f64> = rows.iter().map(|r| r[3].unwrap()).collect();
    assert!((trapezoid(&theta, &density) - 1.0).abs() < 1e-6);
    assert!(rows.iter().all(|r| r[2].unwrap() >= 0.0));

    let peak = theta[density.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0];
    let problem = build_problem(&config, 1, 4).unwrap();
    let sample_mean = problem.gaussian_posterior.unwrap().0[0];
    assert!((peak - sample_mean).abs() < 0.05, "peak {peak} vs sample mean {sample_mean}");

    let err = cmd_dump_proxy(&fit, "sigma", 1.0, 64, &out).unwrap_err();
    assert!(matches!(err, Error::UnknownParameter(ref p) if p == "sigma"), "{err}");
}

#[test]
fn short_grid_pads_the_dump() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = ExperimentConfig::new(ModelKind::Gaussian, vec![2], vec![30], vec![1.0], vec![0]);
    config.output_dir = dir.path().to_path_buf();
    cmd_run(&config).unwrap();
    let out = dir.path().join("d.csv");
    cmd_dump_proxy(&dir.path().join("cells/dim2/seed0/fit_n30.json"), "mu_1", 1.0, 16, &out).unwrap();
    let rows = read_dump(&out);
    assert_eq!(rows.len(), 30);
    assert!(rows[16..].iter().all(|r| r[0].is_none() && r[4].is_some()));
}

/// Snapshots and summaries written by `simulate` read back as the same
/// observed data the synthetic problem uses.
#[test]
fn simulated_files_roundtrip_as_observed_data() {
    let dir = tempfile::tempdir().unwrap();
    for (model, dim) in [(ModelKind::Daycare, 8), (ModelKind::Gaussian, 3), (ModelKind::Gvar, 6)] {
        let config = ExperimentConfig::new(model, vec![dim], vec![10], vec![1.0], vec![3]);
        let out = dir.path().join(model.as_str());
        let written = cmd_simulate(&config, dim, 3, None, &out).unwrap();
        let synthetic = build_problem(&config, dim, 3).unwrap();

        let mut files = vec![out.join("summaries.csv")];
        if model == ModelKind::Daycare {
            assert_eq!(written.len(), 3);
            files.push(out.join("snapshots.csv"));
        }
        for file in files {
            let mut from_file = config.clone();
            from_file.data_file = Some(file.clone());
            let p = build_problem(&from_file, dim, 99).unwrap();
            assert_eq!(p.spec.observed(), synthetic.spec.observed(), "{}", file.display());
            assert!(p.truth.is_none());
        }
    }
}

#[test]
fn config_file_errors_name_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "model = \"gaussian\"\ndims = [2]\nn_acq = [20]\nw_values = [1.0]\nseeds = [0]\noutput_dir = \"x\"\nbogus = 1\n").unwrap();
    let msg = ExperimentConfig::load(&path).unwrap_err().to_string();
    assert!(msg.contains("bogus") && msg.contains("bad.toml"), "{msg}");

    fs::write(&path, "model = \"gaussian\"\ndims = [2]\nn_acq = [5]\nw_values = [1.0]\nseeds = [0]\noutput_dir = \"x\"\n").unwrap();
    let msg = ExperimentConfig::load(&path).unwrap_err().to_string();
    assert!(msg.contains("n_acq"), "{msg}");
}
