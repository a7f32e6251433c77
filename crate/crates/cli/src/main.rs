use std::process::ExitCode;

use clap::{Parser, Subcommand};
use herding_cli::commands::{
    cmd_analyze, cmd_meanfield, cmd_run, cmd_sweep, cmd_validate, AnalyzeArgs, MeanfieldArgs, RunArgs, SweepArgs,
    ValidateArgs,
};
use herding_cli::error::{EXIT_FAILURE, EXIT_USAGE};
use herding_cli::CliError;

/// Consensus-threshold herding market model.
#[derive(Debug, Parser)]
#[command(name = "herding", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one configuration and write a run directory.
    Run(RunArgs),
    /// Simulate a grid of configurations in parallel.
    Sweep(SweepArgs),
    /// Solve the stationary mean-field group-size distribution.
    Meanfield(MeanfieldArgs),
    /// Tail statistics and cross-run comparison for run directories.
    Analyze(AnalyzeArgs),
    /// Check the numerics against reference computations.
    Validate(ValidateArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let result: Result<(), CliError> = match cli.command {
        Command::Run(a) => cmd_run(&a).map(|p| println!("{}", p.display())),
        Command::Sweep(a) => cmd_sweep(&a).and_then(|(p, failed)| {
            println!("{}", p.display());
            if failed > 0 {
                eprintln!("error: {failed} grid point(s) failed, see the sweep manifest");
                return Err(CliError::Input { path: p, message: format!("{failed} grid point(s) failed") });
            }
            Ok(())
        }),
        Command::Meanfield(a) => cmd_meanfield(&a).map(|_| ()),
        Command::Analyze(a) => cmd_analyze(&a).map(|r| {
            for row in &r.fits {
                match row.fit {
                    Some(f) => println!(
                        "x={} alpha={:.3}+-{:.3} (cumulative {:.3}) n_tail={} P(|r|>={})={:.3e}",
                        row.x, f.alpha_density, f.stderr, f.alpha_cumulative, f.n_tail, r.tail_threshold, row.tail_mass
                    ),
                    None => println!("x={} no fit above r_min={} P(|r|>={})={:.3e}", row.x, r.r_min, r.tail_threshold, row.tail_mass),
                }
            }
        }),
        Command::Validate(a) => cmd_validate(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = e.exit_code();
            ExitCode::from(if code == 0 { EXIT_FAILURE } else { code })
        }
    }
}
