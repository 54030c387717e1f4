//! Command-line front end for perturbed semi-Markov moment computations.
//!
//! Every command prints one JSON report on stdout. Exit status: 0 when all
//! checks pass, 1 for usage or parse errors, 2 for validation or check
//! failures, 3 when a functional is infinite or the characteristic equation
//! has no root.

mod commands;
mod report;
mod tables;

use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use smp_perturb::verify::DEFAULT_VERIFY_K;
use smp_perturb::Error;

use commands::{ExpandArgs, MomentsArgs, VerifySource, MIN_GRID_POINTS};
use report::RunReport;

const EXIT_OK: u8 = 0;
const EXIT_USAGE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_SEMANTIC: u8 = 3;

const THREADS_ENV: &str = "SMP_PERTURB_THREADS";

#[derive(Debug, Parser)]
#[command(name = "smp-perturb", version, about = "Moments, roots and eps-expansions for perturbed semi-Markov models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the kernel on an eps grid and the conditions A-C.
    Validate {
        model: PathBuf,
        /// Number of equally spaced eps values in [0, eps_max].
        #[arg(long, default_value_t = MIN_GRID_POINTS)]
        eps_grid: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Kernel, sojourn and hitting moments at one eps and rho.
    ///
    /// rho is treated as zero when |rho| < 1e-12.
    Moments {
        model: PathBuf,
        #[arg(long)]
        eps: f64,
        #[arg(long, allow_hyphen_values = true)]
        rho: f64,
        /// Highest derivative order in rho.
        #[arg(long, default_value_t = 0)]
        r: usize,
        /// Target state.
        #[arg(long)]
        j: usize,
        /// Occupied state for the occupation moments.
        #[arg(long)]
        s: Option<usize>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Root of the characteristic equation at each eps.
    Root {
        model: PathBuf,
        /// One or more eps values, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        /// State whose equation is solved first.
        #[arg(long, default_value_t = 1)]
        reference: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Expansion coefficients in eps of the hitting (and occupation) moments.
    Expand {
        model: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        rho: f64,
        #[arg(long)]
        j: usize,
        #[arg(long)]
        s: Option<usize>,
        /// Expansion order.
        #[arg(long)]
        k: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run the cross-check suite on a model file or on seeded random models.
    Verify {
        #[arg(required_unless_present = "random", conflicts_with = "random")]
        model: Option<PathBuf>,
        /// Seed and number of random models.
        #[arg(long, num_args = 2, value_names = ["SEED", "COUNT"])]
        random: Option<Vec<u64>>,
        /// Expansion order for the expansion checks.
        #[arg(long, default_value_t = DEFAULT_VERIFY_K)]
        k: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io { .. } | Error::Parse(_) | Error::InvalidArgument(_) | Error::EpsOutOfRange { .. } => EXIT_USAGE,
        Error::Validation(_) | Error::TailNotCertified { .. } | Error::IllConditioned { .. } => EXIT_VALIDATION,
        Error::NotFinite { .. } | Error::SingularAtZero(_) | Error::NoRoot { .. } => EXIT_SEMANTIC,
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}

/// Writes the report to stdout. A closed pipe is not an error.
fn emit(report: &RunReport, csv: Option<&Path>) -> Result<(), String> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{}", report.to_json()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != ErrorKind::BrokenPipe => return Err(e.to_string()),
        _ => {}
    }
    if let Some(dir) = csv {
        tables::write_tables(dir, &report.outputs).map_err(|e| format!("writing tables to {}: {e}", dir.display()))?;
    }
    Ok(())
}

/// Prints the report (with the error attached, if any) and picks the status.
fn finish(mut report: RunReport, res: smp_perturb::Result<()>, csv: Option<&Path>) -> u8 {
    let code = match &res {
        Err(e) => {
            eprintln!("error: {e}");
            report.error = Some(e.to_string());
            exit_code(e)
        }
        Ok(()) if report.all_pass() => EXIT_OK,
        Ok(()) => EXIT_VALIDATION,
    };
    if let Err(msg) = emit(&report, csv) {
        eprintln!("error: {msg}");
        return EXIT_USAGE;
    }
    code
}

fn settle(command: &str, csv: Option<&Path>, body: impl FnOnce(&mut RunReport) -> smp_perturb::Result<()>) -> u8 {
    let mut report = RunReport::new(command);
    let res = body(&mut report);
    finish(report, res, csv)
}

fn run(cli: Cli) -> u8 {
    match cli.command {
        Command::Validate { model, eps_grid, csv } => {
            if eps_grid < MIN_GRID_POINTS {
                eprintln!("error: --eps-grid needs at least {MIN_GRID_POINTS} points");
                return EXIT_USAGE;
            }
            settle("validate", csv.as_deref(), |rep| commands::validate(rep, &model, eps_grid))
        }
        Command::Moments {
            model,
            eps,
            rho,
            r,
            j,
            s,
            csv,
        } => {
            let args = MomentsArgs {
                path: &model,
                eps,
                rho,
                r,
                j,
                s,
            };
            settle("moments", csv.as_deref(), |rep| commands::moments(rep, &args))
        }
        Command::Root {
            model,
            eps,
            reference,
            csv,
        } => {
            settle("root", csv.as_deref(), |rep| commands::root(rep, &model, &eps, reference))
        }
        Command::Expand {
            model,
            rho,
            j,
            s,
            k,
            csv,
        } => {
            let args = ExpandArgs {
                path: &model,
                rho,
                j,
                s,
                k,
            };
            settle("expand", csv.as_deref(), |rep| commands::expand(rep, &args))
        }
        Command::Verify { model, random, k, csv } => {
            let source = match (&model, random.as_deref()) {
                (_, Some(&[seed, count])) => VerifySource::Random {
                    seed,
                    count: count as usize,
                },
                (Some(path), None) => VerifySource::File(path),
                _ => {
                    eprintln!("error: give a model file or --random SEED COUNT");
                    return EXIT_USAGE;
                }
            };
            settle("verify", csv.as_deref(), |rep| commands::verify(rep, source, k))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_USAGE);
    }
    ExitCode::from(run(cli))
}
