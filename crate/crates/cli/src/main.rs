use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;

use splitbolfi::harness::{cmd_abc, cmd_dump_proxy, cmd_run, cmd_simulate, ExperimentConfig, SweepOutcome};
use splitbolfi::proxy::DEFAULT_GRID_POINTS;

/// Split-BOLFI experiment runner.
#[derive(Parser)]
#[command(name = "splitbolfi", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split-BOLFI sweep over dims × seeds; writes summary.csv.
    Run(SweepArgs),
    /// Marginal rejection ABC over the [abc] grid; writes abc_summary.csv.
    Abc(SweepArgs),
    /// Grid dump of one parameter of a saved fit (cells/.../fit_n*.json).
    DumpProxy {
        #[arg(long)]
        fit: PathBuf,
        #[arg(long)]
        parameter: String,
        #[arg(long, default_value_t = 1.0)]
        w: f64,
        #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
        grid_points: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate one data set, by default at the synthetic truth of --seed.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated parameter vector.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        theta: Option<Vec<f64>>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Added to every configured seed.
    #[arg(long, default_value_t = 0)]
    seed_offset: u64,
    /// Overrides output_dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use the large dimension grid of the model.
    #[arg(long)]
    full_scale: bool,
    /// Overrides the worker count.
    #[arg(long)]
    workers: Option<usize>,
}

impl SweepArgs {
    fn load(&self) -> splitbolfi::Result<ExperimentConfig> {
        let mut config = ExperimentConfig::load(&self.config)?;
        config.apply_seed_offset(self.seed_offset);
        if let Some(out) = &self.out {
            config.output_dir = out.clone();
        }
        if self.full_scale {
            config.apply_full_scale();
        }
        if let Some(w) = self.workers {
            config.workers = w;
        }
        config.validate()?;
        Ok(config)
    }
}

fn report(outcome: SweepOutcome) -> ExitCode {
    println!(
        "{} cells computed, {} reused, {} failed; summary at {}",
        outcome.computed,
        outcome.resumed,
        outcome.failed.len(),
        outcome.summary.display()
    );
    for f in &outcome.failed {
        eprintln!("dim {} seed {}: {}", f.dim, f.seed, f.error);
    }
    if outcome.is_complete() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => args.load().and_then(|c| cmd_run(&c)).map(report),
        Command::Abc(args) => args.load().and_then(|c| cmd_abc(&c)).map(report),
        Command::DumpProxy { fit, parameter, w, grid_points, out } => {
            cmd_dump_proxy(&fit, &parameter, w, grid_points, &out).map(|()| {
                println!("wrote {}", out.display());
                ExitCode::SUCCESS
            })
        }
        Command::Simulate { config, dim, seed, theta, out } => ExperimentConfig::load(&config)
            .and_then(|c| cmd_simulate(&c, dim, seed, theta.as_deref(), &out))
            .map(|paths| {
                for p in paths {
                    println!("wrote {}", p.display());
                }
                ExitCode::SUCCESS
            }),
    };
    result.unwrap_or_else(|e| {
        error!("{e}");
        ExitCode::FAILURE
    })
}
