//! Command-line experiment runner for the `agecycle` library.
//!
//! Each invocation runs one job (or the whole `verify-all` battery), writes
//! `<out>/<job>-<hash>/data.csv` and `summary.json`, and exits with
//! [`EXIT_PASS`], [`EXIT_GATE_FAILURE`] or [`EXIT_ERROR`].

pub mod config;
pub mod jobs;
pub mod report;
pub mod verify;

use std::ffi::OsString;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::{resolve, JobKind, Overrides, RawConfig};
use crate::report::Artifact;

pub const EXIT_PASS: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_GATE_FAILURE: u8 = 2;

pub const DEFAULT_OUT: &str = "agecycle-out";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] agecycle::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "agecycle",
    version,
    about = "Renewal age/cycle experiments and verification gates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON config document for the job.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed; overrides the config's `seed`.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Output root; overrides the config's `out`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Scale n and t down 10x and loosen gates 3x.
    #[arg(long, global = true)]
    quick: bool,
    /// Worker threads (default: all cores). Never changes the artifacts.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<NonZeroUsize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Simulate A(t)/C(t) and compare with its limit law.
    RatioSim,
    /// Monte Carlo renewal function u(t) = E[N(t) + 1].
    RenewalFn,
    /// Solve a renewal equation on a grid.
    Solve,
    /// Ratio CDF derived from the Dynkin-Lamperti density.
    DlCheck,
    /// Beta-integral and Erickson-constant identities.
    Identities,
    /// Run every acceptance experiment.
    VerifyAll,
}

impl Command {
    fn job(self) -> Option<JobKind> {
        match self {
            Command::RatioSim => Some(JobKind::RatioSim),
            Command::RenewalFn => Some(JobKind::RenewalFn),
            Command::Solve => Some(JobKind::Solve),
            Command::DlCheck => Some(JobKind::DlCheck),
            Command::Identities => Some(JobKind::Identities),
            Command::VerifyAll => None,
        }
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit status.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_ERROR
            } else {
                EXIT_PASS
            };
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.map_or(0, NonZeroUsize::get))
        .build();
    let result = match pool {
        Ok(pool) => pool.install(|| execute(&cli)),
        Err(e) => Err(CliError::Config(format!("cannot start worker pool: {e}"))),
    };
    match result {
        Ok(artifact) => {
            if artifact.pass {
                EXIT_PASS
            } else {
                for g in artifact.gates.iter().filter(|g| !g.pass) {
                    eprintln!(
                        "gate {} ({}) failed: observed {:e} > threshold {:e}",
                        g.name, g.criterion, g.observed, g.threshold
                    );
                }
                EXIT_GATE_FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn print_artifact(out: &Path, a: &Artifact) {
    let verdict = if a.pass { "PASS" } else { "FAIL" };
    println!("{verdict} {}", out.join(&a.dir).display());
    for g in &a.gates {
        println!("  {}", g.describe());
    }
}

fn execute(cli: &Cli) -> Result<Artifact, CliError> {
    let raw = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            RawConfig::parse(&text)?
        }
        None => RawConfig::default(),
    };
    let out = cli
        .out
        .clone()
        .or_else(|| raw.out.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));

    match cli.command.job() {
        Some(job) => {
            let overrides = Overrides {
                seed: cli.seed,
                quick: cli.quick,
            };
            let config = resolve(job, &raw, overrides)?;
            let output = jobs::run_job(&config)?;
            let artifact = report::write_job(&out, &config, &output)?;
            print_artifact(&out, &artifact);
            Ok(artifact)
        }
        None => {
            if raw
                != (RawConfig {
                    out: raw.out.clone(),
                    ..RawConfig::default()
                })
            {
                return Err(CliError::Config(
                    "verify-all accepts only `out` in its config; use --seed and --quick".into(),
                ));
            }
            let seed = cli.seed.unwrap_or(config::DEFAULT_SEED);
            let artifact = verify::verify_all(&out, seed, cli.quick, |a| print_artifact(&out, a))?;
            let verdict = if artifact.pass { "PASS" } else { "FAIL" };
            println!("{verdict} {}", out.join(&artifact.dir).display());
            Ok(artifact)
        }
    }
}
