use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use meanfield_cli::config::{parse_config, ConfigError, Experiment};
use meanfield_cli::{run_experiment, RunError, RunOptions};

#[derive(Parser)]
#[command(
    name = "meanfield",
    version,
    about = "Run mean-field dynamics experiments"
)]
struct Cli {
    /// TOML experiment config
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output_dir`
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweep cells
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Seed for randomized initial data, overriding `seed`
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Weighted sup-norm decay of a one-body solution
    Dispersive,
    /// L1 to L-infinity ratios of the linear propagator
    LinearDecay,
    /// Rollnik and global Kato admissibility of the potential
    Rollnik,
    /// One-body comparison error against N and its fitted exponent
    RateSweep,
    /// Trace distance between many-body and mean-field reduced densities
    ManybodyTrace,
    /// Gronwall bound for calibrated coefficient profiles
    GroenwallCert,
    /// Smallest root of eps + C x^3 - x
    Bootstrap,
}

impl From<Command> for Experiment {
    fn from(c: Command) -> Self {
        match c {
            Command::Dispersive => Experiment::Dispersive,
            Command::LinearDecay => Experiment::LinearDecay,
            Command::Rollnik => Experiment::Rollnik,
            Command::RateSweep => Experiment::RateSweep,
            Command::ManybodyTrace => Experiment::ManybodyTrace,
            Command::GroenwallCert => Experiment::GroenwallCert,
            Command::Bootstrap => Experiment::Bootstrap,
        }
    }
}

fn run(cli: &Cli) -> Result<PathBuf, RunError> {
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Syntax(format!("{}: {e}", path.display())))?,
        None => String::new(),
    };
    let cfg = parse_config(&text)?;
    let opts = RunOptions {
        out: cli.out.clone(),
        seed: cli.seed,
        workers: cli.workers,
    };
    let record = run_experiment(cfg, cli.command.into(), &opts)?;
    Ok(record
        .artifacts
        .iter()
        .find(|a| a.kind == "record")
        .map(|a| a.path.clone())
        .unwrap_or_default())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(path) => {
            println!("{}", path.display());
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
