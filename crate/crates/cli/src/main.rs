use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mstpart_cli::{cmd_evaluate, cmd_improve, cmd_partition, cmd_sweep, EXIT_ERROR};
use mstpart_cli::{EvaluateArgs, ImproveArgs, PartitionArgs, SweepArgs};

/// Multilevel k-way hypergraph partitioner.
///
/// Exit status: 0 feasible result, 2 result violates the block caps, 1 error.
#[derive(Debug, Parser)]
#[command(name = "mstpart", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Partition an hMetis hypergraph.
    Partition(PartitionArgs),
    /// Report cutsize and balance of an existing partition.
    Evaluate(EvaluateArgs),
    /// Repair and refine an existing partition.
    Improve(ImproveArgs),
    /// Vary one parameter and emit CSV rows.
    Sweep(SweepArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Partition(a) => cmd_partition(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Improve(a) => cmd_improve(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(report) => {
            print!("{}", report.text);
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
