use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use semistatic::cli::{cmd_mot, cmd_price, cmd_validate, cmd_verify, CommandOutput, Overrides, EXIT_INFEASIBLE};

/// Model-free bounds and robust indifference prices for path-dependent claims.
#[derive(Parser)]
#[command(name = "semistatic", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check convex order and LP feasibility of the calibrated polytope.
    Validate(Common),
    /// Full pricing report: bounds, dual and primal values, indifference prices.
    Price(Common),
    /// Model-free lower and upper bounds only.
    Mot(Common),
    /// Run the property suite on the instance.
    Verify(Common),
}

#[derive(Args)]
struct Common {
    /// Instance file (JSON).
    instance: PathBuf,
    /// Seed for every randomised component.
    #[arg(long)]
    seed: Option<u64>,
    /// Solver tolerance.
    #[arg(long = "tol")]
    tol: Option<f64>,
    /// Largest path lattice accepted.
    #[arg(long = "max-paths")]
    max_paths: Option<usize>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides { seed: self.seed, tolerance: self.tol, max_paths: self.max_paths }
    }
}

fn emit(output: &CommandOutput, out: Option<&Path>) -> ExitCode {
    match out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &output.document) {
                eprintln!("semistatic: cannot write {}: {e}", path.display());
                return ExitCode::from(EXIT_INFEASIBLE as u8);
            }
        }
        None => print!("{}", output.document),
    }
    ExitCode::from(output.code as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, run): (&Common, fn(&Path, &Overrides) -> CommandOutput) = match &cli.command {
        Command::Validate(c) => (c, cmd_validate),
        Command::Price(c) => (c, cmd_price),
        Command::Mot(c) => (c, cmd_mot),
        Command::Verify(c) => (c, cmd_verify),
    };
    let output = run(&common.instance, &common.overrides());
    emit(&output, common.out.as_deref())
}
