use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cvqkd_svd::harness::{self, ExperimentConfig, RunReport, Scenario};
use cvqkd_svd::{Error, Result};

#[derive(Parser)]
#[command(name = "cvqkd-svd", version, about = "SVD eigenchannel simulations for multicarrier CV-QKD")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, env = "CVQKD_SVD_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<String>,
    /// Worker threads for trial parallelism (0 = all cores).
    #[arg(long, env = "CVQKD_SVD_WORKERS", default_value_t = 0)]
    workers: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its CSV and summary.
    Run(Common),
    /// Run a scenario over a grid of one parameter (long-format CSV).
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        parameter: String,
        /// Comma-separated grid values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        grid: Vec<f64>,
    },
    /// Check a config against the schema without running it.
    Validate(Common),
    /// Write the SIA lattice constellation, or the permutation constellation
    /// for a permutation_code config.
    ExportConstellation(Common),
}

fn load(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&c.config)?;
    if let Some(s) = &c.scenario {
        cfg.scenario = Scenario::parse(s)?;
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(t) = c.trials {
        cfg.trials = t;
    }
    if let Some(o) = &c.out {
        cfg.out = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_path(cfg: &ExperimentConfig, suffix: &str) -> PathBuf {
    cfg.out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}{suffix}.csv", cfg.scenario.name())))
}

fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn emit(rep: &RunReport, path: &Path) -> Result<()> {
    harness::write_report(rep, path)?;
    print!("{}", rep.summary());
    println!("wrote {}", path.display());
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.cmd {
        Command::Run(c) => {
            let cfg = load(&c)?;
            let rep = with_pool(c.workers, || harness::run(&cfg))??;
            emit(&rep, &out_path(&cfg, ""))
        }
        Command::Sweep {
            common,
            parameter,
            grid,
        } => {
            let cfg = load(&common)?;
            let rep = with_pool(common.workers, || harness::sweep(&cfg, &parameter, &grid))??;
            emit(&rep, &out_path(&cfg, "_sweep"))
        }
        Command::Validate(c) => {
            let cfg = load(&c)?;
            println!("ok: {} (config sha256 {})", cfg.scenario.name(), cfg.hash());
            Ok(())
        }
        Command::ExportConstellation(c) => {
            let cfg = load(&c)?;
            let rep = harness::constellation_report(&cfg)?;
            emit(&rep, &out_path(&cfg, "_constellation"))
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(harness::exit_code(&e) as u8)
        }
    }
}
