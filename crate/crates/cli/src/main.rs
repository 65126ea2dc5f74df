use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dgtnash_cli::experiment::{self, Mode, RunStatus};
use dgtnash_cli::{load_config, CliError};
use serde::Serialize;

/// Distributed gradient-tracking Nash equilibrium seeking.
#[derive(Parser)]
#[command(name = "dgtnash", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Experiment configuration (TOML).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Directory for relative output paths (created if missing).
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the iteration and write the trace CSV and JSON report.
    Run {
        #[command(flatten)]
        args: RunArgs,
        #[arg(long, value_enum, default_value = "engine")]
        mode: Mode,
    },
    /// Same as `run`, executed by the message-passing simulator by default.
    Simulate {
        #[command(flatten)]
        args: RunArgs,
        #[arg(long, value_enum, default_value = "simnet")]
        mode: Mode,
    },
    /// Print the Nash equilibrium computed centrally.
    SolveNe {
        #[command(flatten)]
        config: ConfigArg,
        /// Use gradient play instead of the linear solve.
        #[arg(long)]
        descent: bool,
    },
    /// Print contraction factors and the step-size bound.
    ComputeBound {
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Check the configured graphs and print their mixing summary.
    ValidateTopology {
        #[command(flatten)]
        config: ConfigArg,
    },
}

fn print_json<T: Serialize>(value: &T) {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    // a closed pipe is not an error worth reporting
    let _ = writeln!(io::stdout().lock(), "{text}");
}

fn setup(path: &Path) -> Result<experiment::Setup, CliError> {
    experiment::build(&load_config(path)?)
}

fn execute(cmd: Command) -> Result<ExitCode, CliError> {
    match cmd {
        Command::Run { args, mode } | Command::Simulate { args, mode } => {
            let config = load_config(&args.config.config)?;
            let summary = experiment::run_experiment(&config, mode, args.out_dir.as_deref())?;
            print_json(&summary);
            Ok(match summary.status {
                RunStatus::Diverged => ExitCode::from(3),
                _ => ExitCode::SUCCESS,
            })
        }
        Command::SolveNe { config, descent } => {
            print_json(&experiment::solve_ne(&setup(&config.config)?, descent)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::ComputeBound { config } => {
            print_json(&experiment::compute_bound(&setup(&config.config)?)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::ValidateTopology { config } => {
            print_json(&experiment::validate_topology(&setup(&config.config)?));
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
