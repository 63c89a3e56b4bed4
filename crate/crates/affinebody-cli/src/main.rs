//! `affinebody`: spectra and checks of quantized affinely-rigid bodies.
//!
//! Exit codes: 0 success, 1 invalid input or failed check, 2 solver non-convergence.

mod args;
mod commands;
mod output;

use std::process::ExitCode;

use affinebody::Error;
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use args::RunArgs;

#[derive(Parser, Debug)]
#[command(name = "affinebody", version, about = "Spectra and wave-function checks of quantized affinely-rigid bodies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Dump spin generators and the representation matrix D^s at a rotation vector
    Reps(RunArgs),
    /// Run the rotation-group invariant suite
    GeometryCheck(RunArgs),
    /// Assemble and solve a reduced Hamiltonian, with a convergence study
    Spectrum(RunArgs),
    /// Solve the separable n = 2 theory sector by sector
    Planar(RunArgs),
    /// Check an amplitude file against the wave-function constraints
    ValidateWavefunction(RunArgs),
    /// Run the acceptance suite
    Acceptance(RunArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(commands::FAILED_CHECK as u8),
            };
        }
    };
    let args = match &cli.command {
        Command::Reps(a)
        | Command::GeometryCheck(a)
        | Command::Spectrum(a)
        | Command::Planar(a)
        | Command::ValidateWavefunction(a)
        | Command::Acceptance(a) => a,
    };
    let result = args.resolve().and_then(|cfg| match &cli.command {
        Command::Reps(_) => commands::reps(&cfg),
        Command::GeometryCheck(_) => commands::geometry_check(&cfg),
        Command::Spectrum(a) => commands::spectrum(&cfg, a.format),
        Command::Planar(a) => commands::planar(&cfg, a.format),
        Command::ValidateWavefunction(_) => commands::validate_wavefunction(&cfg),
        Command::Acceptance(_) => commands::acceptance(&cfg),
    });
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e @ Error::NonConvergence { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::NOT_CONVERGED as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::FAILED_CHECK as u8)
        }
    }
}
