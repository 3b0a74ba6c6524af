//! meclab: experiment harness for the partially hyperbolic torus laboratory.
//!
//! `meclab run <config> [--workers N] [--out DIR]` dispatches one of ten
//! experiments described by a flat key/value config and writes CSV data
//! files plus a JSON manifest. `meclab list` prints the experiment names.
//!
//! Exit codes: 0 success, 1 embedded acceptance check failed, 2 config
//! parse error, 3 validation failure.

mod config;
mod experiments;
mod output;

use clap::{Parser, Subcommand};
use config::{CliError, EXPERIMENTS};
use output::Manifest;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "meclab", version, about = "numerical laboratory for partially hyperbolic torus maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file
    Run {
        /// path to a key/value config with [map], [experiment], [params]
        config: PathBuf,
        /// worker threads (default: config, then $MECLAB_WORKERS, then all cores)
        #[arg(long)]
        workers: Option<usize>,
        /// output directory (default: config `out`, then `meclab-out/<name>`)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the available experiments
    List,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::List => {
            for (name, description) in EXPERIMENTS {
                println!("{name:<12} {description}");
            }
            ExitCode::SUCCESS
        }
        Command::Run { config, workers, out } => match run(&config, workers, out) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => {
                eprintln!("meclab: embedded acceptance check failed (see manifest.json)");
                ExitCode::from(1)
            }
            Err(e @ CliError::Parse(_)) => {
                eprintln!("meclab: {e}");
                ExitCode::from(2)
            }
            Err(e @ (CliError::Validation(_) | CliError::Core(_))) => {
                eprintln!("meclab: {e}");
                ExitCode::from(3)
            }
            Err(e @ CliError::Io(_)) => {
                eprintln!("meclab: {e}");
                ExitCode::from(1)
            }
        },
    }
}

fn run(path: &PathBuf, workers: Option<usize>, out: Option<PathBuf>) -> Result<bool, CliError> {
    let text = std::fs::read_to_string(path)?;
    let config = config::parse(&text).map_err(CliError::Parse)?;
    let canonical = config::serialize(&config);
    let seed = config.rng_seed()?;
    let map = config.build_map()?;

    let workers = resolve_workers(workers, config.workers()?)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(|e| CliError::Io(std::io::Error::other(e)))?;

    let dir = out
        .or_else(|| config.experiment.get("out").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("meclab-out").join(config.name()));
    std::fs::create_dir_all(&dir)?;

    let manifest = Manifest::start(&config, &canonical, seed, workers);
    let (files, summary, pass) = experiments::run(&config, &map, &dir, seed)?;
    manifest.finish(&dir, files, summary, pass)?;
    Ok(pass)
}

fn resolve_workers(flag: Option<usize>, from_config: Option<usize>) -> Result<usize, CliError> {
    let from_env = match std::env::var("MECLAB_WORKERS") {
        Ok(s) => Some(s.parse().map_err(|_| {
            CliError::Parse(config::ParseError(format!(
                "MECLAB_WORKERS `{s}` is not a positive integer"
            )))
        })?),
        Err(_) => None,
    };
    let n = flag
        .or(from_config)
        .or(from_env)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |p| p.get()));
    if n == 0 {
        return Err(CliError::Validation(config::ValidationError(
            "worker count must be positive".into(),
        )));
    }
    Ok(n)
}
