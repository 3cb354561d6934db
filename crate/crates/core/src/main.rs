use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vortex_core::cli;

/// Steady vortex rings and lake vortices as least-energy solutions.
#[derive(Parser)]
#[command(name = "vortex", version)]
struct Args {
    /// Output directory for `run` (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for the randomized checks (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Suppress tables on stdout.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the epsilon sweep of a config and write fields and reports.
    Run { config: PathBuf },
    /// Run the property checks on a small copy of the configured problem.
    Check { config: PathBuf },
    /// Re-tabulate the report of a finished sweep.
    Report { dir: PathBuf },
}

fn main() -> ExitCode {
    let args = Args::parse();
    let code = match &args.command {
        Command::Run { config } => cli::cmd_run(config, args.out.as_deref(), args.seed, args.quiet),
        Command::Check { config } => cli::cmd_check(config, args.seed, args.quiet),
        Command::Report { dir } => cli::cmd_report(dir, args.quiet),
    };
    ExitCode::from(code as u8)
}
