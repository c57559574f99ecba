use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ifs::commands::{self, Context, SimulateArgs};
use ifs::CliError;

/// Impulsive semiflow experiments.
#[derive(Debug, Parser)]
#[command(name = "ifs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// Scenario file.
    scenario: PathBuf,
    /// Experiment block to run.
    #[arg(long, default_value = "default")]
    experiment: String,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads (also read from IFS_THREADS).
    #[arg(long, env = "IFS_THREADS")]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build one impulsive trajectory and write it as CSV.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Initial point in chart coordinates, e.g. "1,pi".
        #[arg(long)]
        x0: Option<String>,
        /// Simulated time span.
        #[arg(long)]
        horizon: Option<f64>,
        /// Spacing of the sampled rows.
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Estimate the non-wandering set on a grid.
    Omega(Common),
    /// Profile the first-hit function on the estimate.
    Taud(Common),
    /// Time averages, invariance defects and candidate measures.
    Measure(Common),
    /// Gluing classes and the conjugacy residual.
    Quotient(Common),
    /// Run every block and compare with the expected outcomes.
    Verify(Common),
}

fn run(cli: Cli) -> Result<(), CliError> {
    let common = match &cli.command {
        Command::Simulate { common, .. }
        | Command::Omega(common)
        | Command::Taud(common)
        | Command::Measure(common)
        | Command::Quotient(common)
        | Command::Verify(common) => common,
    };
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Schema(e.to_string()))?;
    }
    let ctx = Context::load(&common.scenario, &common.out)?;
    let exp = common.experiment.as_str();
    let report = match &cli.command {
        Command::Simulate {
            x0, horizon, dt, ..
        } => {
            let args = SimulateArgs {
                x0: x0.clone(),
                horizon: *horizon,
                dt: *dt,
            };
            commands::simulate(&ctx, exp, &args)?
        }
        Command::Omega(_) => commands::omega(&ctx, exp)?,
        Command::Taud(_) => commands::taud(&ctx, exp)?,
        Command::Measure(_) => commands::measure(&ctx, exp)?,
        Command::Quotient(_) => commands::quotient(&ctx, exp)?,
        Command::Verify(_) => commands::verify(&ctx, exp)?,
    };
    let verdict = if report.passed() { "pass" } else { "fail" };
    println!("{} {}: {}", report.command, report.scenario, verdict);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ifs: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
