//! Command-line front end: JSON parameter files in, human-readable or JSON
//! summaries out, CSV tables for anything worth plotting. Exit codes are
//! part of the interface: 0 success, 1 validation problem, 2 numerical
//! failure, 3 inconclusive measurement.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use morphfront::Error;

#[derive(Parser)]
#[command(
    name = "morphfront",
    version,
    about = "Spreading speeds and front composition for a two-morph \
             competition-diffusion-mutation model"
)]
struct Cli {
    /// JSON parameter file (required by every subcommand)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Directory for CSV outputs (created if missing)
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads for sweep and mu-curve; outputs do not depend on it
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    /// Print machine-readable JSON instead of the text summary
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimal front speed of the linearised leading edge
    Speed,
    /// Small-mutation limit: crossing point, branch slopes, derivatives
    Limits,
    /// Which limiting speed the mutation-free front selects
    Classify,
    /// Equilibria of both reactions plus the bounding states
    Equilibria {
        /// Newton seed lattice size per axis
        #[arg(long, default_value_t = 25)]
        grid: usize,
    },
    /// Evaluate every lower-bound condition with its margin
    Conditions,
    /// Minimised speed along a logarithmic mutation grid
    #[command(name = "mu-curve")]
    MuCurve {
        /// Smallest mutation magnitude
        #[arg(long, default_value_t = 1e-6)]
        mu_min: f64,
        /// Largest mutation magnitude
        #[arg(long, default_value_t = 10.0)]
        mu_max: f64,
        /// Number of grid points
        #[arg(long, default_value_t = 25)]
        points: usize,
    },
    /// Regime and composition maps over growth and diffusivity ratios
    Sweep {
        /// Points per axis of the ratio grid
        #[arg(long, default_value_t = 50)]
        grid: usize,
    },
    /// Run the front simulation and write trace and profile tables
    Simulate(SimArgs),
    /// Compare the measured front speed against the linearised value
    Verify {
        #[command(flatten)]
        sim: SimArgs,
        /// Relative speed tolerance
        #[arg(long, default_value_t = 0.03)]
        tolerance: f64,
    },
}

/// Overrides for the simulation settings; anything left unset falls back to
/// the config file's `sim` section and then to the desk-scale defaults.
#[derive(Args)]
struct SimArgs {
    /// Domain length
    #[arg(long)]
    length: Option<f64>,
    /// Number of grid points
    #[arg(long)]
    nx: Option<usize>,
    /// Final time
    #[arg(long)]
    t_end: Option<f64>,
    /// Fraction of the diffusive stability limit used for the time step
    #[arg(long)]
    cfl_safety: Option<f64>,
    /// Front level as a fraction of the back-state total density
    #[arg(long)]
    threshold_frac: Option<f64>,
    /// Position of the initial Heaviside cutoff
    #[arg(long)]
    x0: Option<f64>,
    /// "neumann" or "dirichlet-left"
    #[arg(long)]
    boundary: Option<String>,
}

/// Failures carrying their exit code. Library errors are grouped by kind:
/// bad inputs and unmet preconditions are validation, lost convergence or
/// consistency is numerical, and starved measurements are inconclusive.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(String),
    Inconclusive(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Inconclusive(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Numerical(m) | CliError::Inconclusive(m) => {
                f.write_str(m)
            }
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        match e {
            Error::SingularJacobian { .. }
            | Error::NoConvergence { .. }
            | Error::BracketFailure { .. }
            | Error::BlowUp { .. }
            | Error::CflViolated { .. }
            | Error::Inconsistency(_) => CliError::Numerical(message),
            Error::TooFewSamples { .. } => CliError::Inconclusive(message),
            _ => CliError::Validation(message),
        }
    }
}

/// Parses `argv`, runs the selected command and returns the process exit
/// code. Errors are printed to standard error here so callers only deal
/// with the code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version land here and must keep their
            // conventional success status.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::Validation("--config is required".into()))?;
    let run = config::load_config(path)?;
    if let Some(dir) = cli.out.as_deref() {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Validation(format!("cannot create {}: {e}", dir.display())))?;
    }
    let ctx = commands::Context {
        run,
        out: cli.out,
        json: cli.json,
    };

    let work = || match cli.command {
        Command::Speed => commands::speed(&ctx),
        Command::Limits => commands::limits(&ctx),
        Command::Classify => commands::classify(&ctx),
        Command::Equilibria { grid } => commands::equilibria(&ctx, grid),
        Command::Conditions => commands::conditions(&ctx),
        Command::MuCurve {
            mu_min,
            mu_max,
            points,
        } => commands::mu_curve(&ctx, mu_min, mu_max, points),
        Command::Sweep { grid } => commands::sweep(&ctx, grid),
        Command::Simulate(args) => commands::simulate(&ctx, &args),
        Command::Verify { sim, tolerance } => commands::verify(&ctx, &sim, tolerance),
    };

    match cli.jobs {
        // Scope the worker count so every parallel loop below sees it; the
        // row order of all outputs is fixed, so the count never changes
        // what gets written.
        Some(n) => {
            if n == 0 {
                return Err(CliError::Validation("--jobs must be at least 1".into()));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Validation(format!("cannot build thread pool: {e}")))?;
            pool.install(work)
        }
        None => work(),
    }
}
