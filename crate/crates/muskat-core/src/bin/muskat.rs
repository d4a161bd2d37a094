use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use muskat::cli::{self, InspectMode};

#[derive(Parser)]
#[command(
    name = "muskat",
    version,
    about = "Muskat interface simulations and modulus certificates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the configured scenario and run the monitors.
    Simulate { config: PathBuf },
    /// Search (δ, γ) and verify the modulus margins on the ξ-grid.
    CertifyModulus { config: PathBuf },
    /// Print slope statistics of a state file.
    Inspect {
        state: PathBuf,
        /// Dump kernel samples on the default lattice.
        #[arg(long, conflicts_with = "rhs")]
        kernel: bool,
        /// Dump both right-hand-side forms and their difference.
        #[arg(long)]
        rhs: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                cli::EXIT_INVALID as u8
            } else {
                0
            });
        }
    };
    cli::init_threads();
    let code = match cli.command {
        Command::Simulate { config } => cli::cmd_simulate(&config),
        Command::CertifyModulus { config } => cli::cmd_certify_modulus(&config),
        Command::Inspect { state, kernel, rhs } => {
            let mode = if kernel {
                InspectMode::Kernel
            } else if rhs {
                InspectMode::Rhs
            } else {
                InspectMode::Summary
            };
            cli::cmd_inspect(&state, mode, &mut std::io::stdout().lock())
        }
    };
    ExitCode::from(code as u8)
}
