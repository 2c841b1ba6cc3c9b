//! `fairrisk` — train, calibrate, audit, and mitigate dropout-risk
//! classifiers from one replayable JSON configuration.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 data validation
//! error, 3 mitigation infeasible for every group spec. Log verbosity is
//! controlled by the `RUST_LOG` environment variable.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod config;
mod pipeline;

use pipeline::Overrides;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Infeasible(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Infeasible(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Infeasible(m) => m,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "fairrisk",
    version,
    about = "Fairness-aware dropout risk prediction: generate, audit, mitigate"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON run configuration
    #[arg(long)]
    config: PathBuf,
    /// Override the configured seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured cohort CSV path
    #[arg(long)]
    cohort: Option<PathBuf>,
    /// Override the configured report directory
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            cohort: self.cohort.clone(),
            out_dir: self.out_dir.clone(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort CSV plus a marginal fit report
    Synth(CommonArgs),
    /// Train (or load), calibrate, and audit a model per demographic group
    Audit(CommonArgs),
    /// Audit, then equalize one generalized error rate per group spec
    Mitigate(CommonArgs),
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth(args) => pipeline::cmd_synth(&args.config, &args.overrides()),
        Command::Audit(args) => pipeline::cmd_audit(&args.config, &args.overrides()),
        Command::Mitigate(args) => pipeline::cmd_mitigate(&args.config, &args.overrides()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
