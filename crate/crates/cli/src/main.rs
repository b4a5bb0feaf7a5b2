//! Command-line driver: `ingest`, `estimate`, `simulate` and `evaluate`.
//!
//! Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 data error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ttergm::Error;

use crate::config::RunConfig;

#[derive(Parser)]
#[command(name = "ttergm", version, about = "Temporal exponential random graph models for influencer networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse an event log and write monthly snapshots and connection features.
    Ingest(Common),
    /// Fit a model (MPLE, optionally refined by MCMLE) to a network.
    Estimate(Common),
    /// Simulate snapshots forward from the last observed one.
    Simulate(Common),
    /// Hold out the final months and compare TTERGM, TERGM and the block model.
    Evaluate(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Root seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Io(_) => 3,
        _ => 4,
    }
}

fn init_logging(level: Option<&str>) {
    let env = env_logger::Env::default().default_filter_or(level.unwrap_or("warn"));
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

fn run(command: Command) -> ttergm::Result<()> {
    let (Command::Ingest(common) | Command::Estimate(common) | Command::Simulate(common) | Command::Evaluate(common)) =
        &command;
    let cfg = RunConfig::load(&common.config)?;
    init_logging(cfg.log_level.as_deref());
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let seed = common.seed.unwrap_or(cfg.seed);
    let out = common
        .out
        .clone()
        .or_else(|| cfg.output_dir())
        .ok_or_else(|| Error::Config("no output directory: pass --out or set output_dir".into()))?;
    match command {
        Command::Ingest(_) => commands::ingest(cfg.ingest()?, &cfg.base, &out),
        Command::Estimate(_) => commands::estimate(cfg.estimate()?, &cfg.base, seed, &out),
        Command::Simulate(_) => commands::simulate(cfg.simulate()?, &cfg.base, seed, &out),
        Command::Evaluate(_) => commands::evaluate(cfg.evaluate()?, &cfg.base, seed, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
