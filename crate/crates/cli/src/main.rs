mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Context, Failure};

#[derive(Parser)]
#[command(
    name = "tcl",
    version,
    about = "Time-convolutionless master equations: generators, propagation, resummation and exact checks"
)]
struct Cli {
    /// Directory for output files (created if missing).
    #[arg(long, global = true, default_value = ".")]
    output_dir: PathBuf,
    /// Seed for random-matrix self-tests.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Suppress progress output.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate the reduced state and write the trajectory and a report.
    Simulate { config: PathBuf },
    /// List the signed compositions of order n (n <= 12).
    Diagrams { n: usize },
    /// Compare TCL2/TCL4 generators with the exact generator of a discrete bath.
    OracleCompare { config: PathBuf },
    /// Two-point function via the dynamical map and the three-point factorization gap.
    Correlation { config: PathBuf },
}

fn run(cli: Cli) -> Result<(), Failure> {
    let ctx = Context {
        output_dir: cli.output_dir,
        seed: cli.seed,
        quiet: cli.quiet,
    };
    commands::ensure_dir(&ctx.output_dir)?;
    let load =
        |path: &PathBuf| config::parse_config(path).map_err(|e| Failure::Validation(e.to_string()));
    match cli.command {
        Command::Simulate { config } => commands::simulate(&load(&config)?, &ctx),
        Command::Diagrams { n } => commands::diagrams(n, &ctx),
        Command::OracleCompare { config } => commands::oracle_compare(&load(&config)?, &ctx),
        Command::Correlation { config } => commands::correlation(&load(&config)?, &ctx),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // clap uses 2 for usage errors; here 2 is reserved for numerical failures.
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let text = f.message().trim_end();
            eprintln!("error: {text}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
