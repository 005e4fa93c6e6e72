//! Command-line runner around the `chflow` library.
//!
//! Every run is driven by a TOML configuration file and writes its artifacts
//! (CSV series, a JSON manifest, and an echo of the configuration) into one
//! output directory. Runs are deterministic: identical configurations produce
//! bit-identical files, so output directories can be diffed across machines.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod config;
mod runner;

/// Failures after argument parsing. The variant decides the process exit
/// code: configuration problems exit 2, numerical problems exit 3.
#[derive(Debug)]
pub enum RunError {
    Config(String),
    Numerical(String),
}

#[derive(Parser, Debug)]
#[command(name = "chflow", version, about = "Periodic Camassa-Holm hierarchy toolbox")]
struct Cli {
    /// TOML run configuration (required by every subcommand).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory; overrides `out` from the configuration file.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Silence progress messages on stderr. Check results on stdout
    /// (verify-identities) are still printed.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Integrate the PDE on a periodic grid and record the trajectory.
    SimulateEulerian,
    /// Integrate interacting crests, with collision detection and optional
    /// conservative continuation through a pairwise collision.
    SimulatePeakons,
    /// Expand the solution in powers of time and report how the coefficients
    /// grow, cross-checked against a direct solve.
    TaylorAnalyze,
    /// Run the exact operator and counting identities and print a PASS/FAIL
    /// table; exits nonzero if any check fails.
    VerifyIdentities,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::SimulateEulerian => "simulate-eulerian",
            Command::SimulatePeakons => "simulate-peakons",
            Command::TaylorAnalyze => "taylor-analyze",
            Command::VerifyIdentities => "verify-identities",
        }
    }
}

/// Parses `args` (including the program name) and runs the requested
/// subcommand, returning the process exit code instead of exiting so tests
/// can call it in-process.
pub fn run_from<I, A>(args: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            // clap uses 0 for --help/--version and 2 for usage errors.
            let code = err.exit_code();
            let _ = err.print();
            return code;
        }
    };
    match runner::run(cli) {
        Ok(()) => 0,
        Err(RunError::Config(msg)) => {
            eprintln!("config error: {msg}");
            2
        }
        Err(RunError::Numerical(msg)) => {
            eprintln!("numerical abort: {msg}");
            3
        }
    }
}
