//! `qrouter`: scenario-driven simulation and count analysis for the
//! two-control optical quantum router.
//!
//! Exit codes: 0 success, 1 validation error (bad scenario or malformed
//! input), 2 reproduction-check failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod format;
mod scenario;
mod tables;

use format::Precision;

#[derive(Debug)]
pub(crate) enum CliError {
    Validation(String),
    CheckFailure(String),
}

impl CliError {
    pub fn validation(msg: String) -> Self {
        CliError::Validation(msg)
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::CheckFailure(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::CheckFailure(m) => m,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(format!("io error: {e}"))
    }
}

#[derive(Parser)]
#[command(
    name = "qrouter",
    about = "Simulate and analyze a two-control linear-optical quantum router",
    version
)]
struct Cli {
    /// Emit numbers at full round-trip precision instead of 6 significant digits
    #[arg(long, global = true, value_name = "MODE")]
    precision: Option<String>,
    /// Output format
    #[arg(long, global = true, value_parser = ["csv", "json"])]
    format: Option<String>,
    /// Write output to a file instead of stdout
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact ideal-run routing results per (signal, control) pair
    Ideal {
        #[arg(long, value_name = "PATH")]
        scenario: PathBuf,
    },
    /// Routing probabilities over a grid of control phases
    SweepPhi {
        #[arg(long, value_name = "PATH")]
        scenario: PathBuf,
        /// Number of grid points over [0, max-phi]
        #[arg(long, default_value_t = 9)]
        points: usize,
        /// Upper end of the phase grid in radians
        #[arg(long, default_value_t = std::f64::consts::PI)]
        max_phi: f64,
    },
    /// Seeded Monte Carlo coincidence counting with alternating
    /// interfering/detuned blocks
    SimulateCounts {
        #[arg(long, value_name = "PATH")]
        scenario: PathBuf,
        /// Override the scenario seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Turn count tables (and optionally a fringe table) into result tables
    Analyze {
        /// Counts CSV produced by simulate-counts (or hand-recorded)
        #[arg(long, value_name = "PATH")]
        counts: PathBuf,
        /// Fringe CSV: phase, relative counts, error
        #[arg(long, value_name = "PATH")]
        fringe: Option<PathBuf>,
        /// Constant accidental level subtracted from the fringe offset
        #[arg(long)]
        noise_floor: Option<f64>,
    },
    /// Re-derive the bundled reference tables and check every value against
    /// its expected band
    Reproduce {
        /// Read the reference tables from a directory instead of the
        /// bundled copies
        #[arg(long, value_name = "DIR")]
        data: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let precision = match cli.precision.as_deref() {
        None => Precision::Six,
        Some("full") => Precision::Full,
        Some(other) => {
            eprintln!("error: unknown precision `{other}` (expected `full`)");
            return ExitCode::from(1);
        }
    };
    let ctx = commands::CmdContext {
        precision,
        format: cli.format.clone(),
        out: cli.out.clone(),
    };
    let result = match &cli.command {
        Command::Ideal { scenario } => commands::ideal::run(&ctx, scenario),
        Command::SweepPhi {
            scenario,
            points,
            max_phi,
        } => commands::sweep::run(&ctx, scenario, *points, *max_phi),
        Command::SimulateCounts { scenario, seed } => {
            commands::simulate::run(&ctx, scenario, *seed)
        }
        Command::Analyze {
            counts,
            fringe,
            noise_floor,
        } => commands::analyze::run(&ctx, counts, fringe.as_deref(), *noise_floor),
        Command::Reproduce { data } => commands::reproduce::run(&ctx, data.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
