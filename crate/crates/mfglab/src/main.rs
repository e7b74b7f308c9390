use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mfglab::commands::{EXIT_CONFIG, EXIT_OK};
use mfglab::{cmd_analyze, cmd_check_models, cmd_solve, init_threads, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "mfglab", version, about = "Variational mean field games with congestion on the torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the problem of a config and dump m, w, u, p and the report.
    Solve { config: PathBuf },
    /// Run the regularity experiments on the dumps of a solve.
    Analyze { dir: PathBuf, config: PathBuf },
    /// Run the congestion model property suite.
    CheckModels {
        /// `quadratic`, `entropy` or `power:<q>`; repeatable. Defaults to all.
        #[arg(long = "model")]
        models: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 1_000)]
        prox_samples: usize,
    },
}

fn run(cli: Cli) -> Result<i32, CliError> {
    init_threads()?;
    match cli.command {
        Command::Solve { config } => cmd_solve(&RunConfig::load(&config)?),
        Command::Analyze { dir, config } => cmd_analyze(&dir, &RunConfig::load(&config)?),
        Command::CheckModels { models, seed, samples, prox_samples } => Ok(cmd_check_models(&models, seed, samples, prox_samples)?.0),
    }
}

fn main() -> ExitCode {
    let code = match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("mfglab: {e}");
            EXIT_CONFIG
        }
    };
    if code == EXIT_OK {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(code as u8)
    }
}
