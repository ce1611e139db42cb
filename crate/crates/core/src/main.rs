use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info};

use thz_noma::harness::{
    load_config, run_experiment, run_pipeline, write_csv, ConfigError, ExperimentError, ExperimentId, PipelineOutput,
};

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "thz-noma", version, about = "THz MIMO-NOMA link-level simulator")]
struct Cli {
    /// Only log errors.
    #[arg(long, global = true, conflicts_with = "verbose")]
    quiet: bool,
    /// Log per-run details.
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Scenario configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline for one seed.
    Simulate {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        seed: u64,
        /// Metrics CSV; per-user powers and rates go to `<stem>.users.csv`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one experiment family over seeded replicates.
    Experiment {
        #[arg(long)]
        id: String,
        #[command(flatten)]
        config: ConfigArg,
        /// Defaults to `seeds.replicates` of the configuration.
        #[arg(long)]
        replicates: Option<usize>,
        /// Comma-separated sweep values replacing the experiment's defaults.
        #[arg(long, value_delimiter = ',')]
        sweep: Option<Vec<f64>>,
        /// Raw rows; the summary goes to `<stem>.summary.csv`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Load and validate a configuration file.
    ValidateConfig {
        #[command(flatten)]
        config: ConfigArg,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        let code = match e {
            ConfigError::Io { .. } => EXIT_IO,
            _ => EXIT_CONFIG,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        let code = match e {
            ExperimentError::UnknownId(_) | ExperimentError::InvalidSweep { .. } | ExperimentError::EmptySweep(_) => {
                EXIT_CONFIG
            }
            ExperimentError::NoReplicates => EXIT_CONFIG,
            ExperimentError::Run { .. } => EXIT_RUNTIME,
            ExperimentError::Io { .. } => EXIT_IO,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_IO,
        message: format!("cannot write {}: {e}", path.display()),
    }
}

fn write_simulation(out: &Path, seed: u64, run: &PipelineOutput) -> Result<PathBuf, Failure> {
    let m = &run.metrics;
    let mut w = csv::Writer::from_path(out).map_err(|e| io_failure(out, e))?;
    w.write_record([
        "seed",
        "ee_bits_per_joule",
        "sum_rate_bps",
        "mse",
        "outer_iters",
        "inner_iters_total",
        "feasible",
        "cluster_iters",
    ])
    .map_err(|e| io_failure(out, e))?;
    w.write_record([
        seed.to_string(),
        m.ee_bits_per_joule.to_string(),
        m.sum_rate_bps.to_string(),
        m.mse.to_string(),
        m.outer_iters.to_string(),
        m.inner_iters_total.to_string(),
        u8::from(m.feasible).to_string(),
        m.cluster_iters.to_string(),
    ])
    .map_err(|e| io_failure(out, e))?;
    w.flush().map_err(|e| io_failure(out, e))?;

    let stem = out
        .file_stem()
        .map_or_else(|| "simulation".into(), |s| s.to_string_lossy().into_owned());
    let users = out.with_file_name(format!("{stem}.users.csv"));
    let mut w = csv::Writer::from_path(&users).map_err(|e| io_failure(&users, e))?;
    w.write_record(["bs", "user", "cluster", "sic_rank", "power_w", "rate_bps"])
        .map_err(|e| io_failure(&users, e))?;
    for (b, gains) in run.scenario.gains.iter().enumerate() {
        for (n, order) in gains.order.iter().enumerate() {
            for (rank, &u) in order.iter().enumerate() {
                w.write_record([
                    b.to_string(),
                    u.to_string(),
                    n.to_string(),
                    (rank + 1).to_string(),
                    run.solution.powers[b][u].to_string(),
                    run.solution.rates[b][u].to_string(),
                ])
                .map_err(|e| io_failure(&users, e))?;
            }
        }
    }
    w.flush().map_err(|e| io_failure(&users, e))?;
    Ok(users)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::ValidateConfig { config } => {
            load_config(&config.config)?;
            info!("{} is valid", config.config.display());
        }
        Command::Simulate { config, seed, out } => {
            let cfg = load_config(&config.config)?;
            let result = run_pipeline(&cfg, seed).map_err(|e| Failure {
                code: EXIT_RUNTIME,
                message: e.to_string(),
            })?;
            info!(
                "seed {seed}: EE {:.4e} bits/J, sum rate {:.4e} bit/s, {} outer iterations",
                result.metrics.ee_bits_per_joule, result.metrics.sum_rate_bps, result.metrics.outer_iters
            );
            let users = write_simulation(&out, seed, &result)?;
            info!("wrote {} and {}", out.display(), users.display());
        }
        Command::Experiment {
            id,
            config,
            replicates,
            sweep,
            out,
        } => {
            let id: ExperimentId = id.parse()?;
            let cfg = load_config(&config.config)?;
            let replicates = replicates.unwrap_or(cfg.seeds.replicates);
            info!("running {id} with {replicates} replicates");
            let result = run_experiment(id, &cfg, replicates, sweep.as_deref())?;
            let summary = write_csv(&result, &out)?;
            info!(
                "wrote {} rows to {} and {}",
                result.rows.len(),
                out.display(),
                summary.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = if cli.quiet {
        log::LevelFilter::Error
    } else if cli.verbose {
        log::LevelFilter::Debug
    } else {
        log::LevelFilter::Info
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            error!("{}", f.message);
            ExitCode::from(f.code)
        }
    }
}
