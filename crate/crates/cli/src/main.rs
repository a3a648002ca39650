//! `rwsre`: command-line driver for the simulation library.
//!
//! Exit codes: 0 pass, 1 fail, 2 inconclusive, 64 configuration error.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rwsre::environment::{DisorderSpec, KernelKind};

use crate::config::{parse_disorder, parse_kernel, RunConfig, MAX_SEED};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Fail(String),
    Inconclusive(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            Self::Fail(_) => 1,
            Self::Inconclusive(_) => 2,
            Self::Config(_) => 64,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) => write!(f, "configuration error: {m}"),
            Self::Fail(m) => write!(f, "failed: {m}"),
            Self::Inconclusive(m) => write!(f, "inconclusive: {m}"),
        }
    }
}

impl From<rwsre::Error> for CliError {
    fn from(e: rwsre::Error) -> Self {
        use rwsre::Error::*;
        match e {
            StepBudget { .. } => Self::Fail(e.to_string()),
            NoBracket { .. } => Self::Inconclusive(e.to_string()),
            _ => Self::Config(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "rwsre",
    version,
    about = "Random walks in sparse random environments and pinning"
)]
struct Cli {
    /// TOML run configuration; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for output files.
    #[arg(
        long,
        global = true,
        env = "RWSRE_OUT_DIR",
        default_value = "rwsre-out"
    )]
    out_dir: PathBuf,
    /// Worker threads (defaults to one per core). Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Master seed for every random stream of the run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample an environment and tabulate its kernel.
    Env(EnvArgs),
    /// Potential, exact visit formulas and Monte Carlo visit counts.
    Walk(WalkArgs),
    /// Partition functions, free energies and critical points.
    Pinning(PinningArgs),
    /// Check the walk/pinning identity and the E[tau_1] bound.
    Verify(VerifyArgs),
    /// Classify a (beta, h) grid into transience regimes.
    Scan(ScanArgs),
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// power_law:ALPHA:N_MAX, geometric:Q:N_MAX or dirac:STEP
    #[arg(long, value_parser = parse_kernel)]
    kernel: Option<KernelKind>,
    /// gaussian:SIGMA, rademacher or uniform:HALF_WIDTH
    #[arg(long, value_parser = parse_disorder)]
    disorder: Option<DisorderSpec<f64>>,
}

#[derive(Debug, Args)]
struct CouplingArgs {
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    h: Option<f64>,
}

#[derive(Debug, Args)]
struct EnvArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    horizon: Option<usize>,
}

#[derive(Debug, Args)]
struct WalkArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    coupling: CouplingArgs,
    #[arg(long, allow_negative_numbers = true)]
    f: Option<f64>,
    #[arg(long)]
    horizon: Option<usize>,
    /// Absorbing level R.
    #[arg(long)]
    target: Option<usize>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    step_budget: Option<u64>,
    #[arg(long)]
    speed_steps: Option<usize>,
    #[arg(long)]
    speed_replicas: Option<usize>,
}

#[derive(Debug, Args)]
struct PinningArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    coupling: CouplingArgs,
    #[arg(long)]
    n: Option<usize>,
    /// Drift of the grand canonical series.
    #[arg(long, allow_negative_numbers = true)]
    grand_canonical_f: Option<f64>,
    /// Also locate the quenched critical point.
    #[arg(long)]
    critical: bool,
    #[arg(long)]
    search_n: Option<usize>,
    #[arg(long)]
    search_replicas: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    coupling: CouplingArgs,
    #[arg(long, allow_negative_numbers = true)]
    f: Option<f64>,
    #[arg(long)]
    tau_replicas: Option<usize>,
    #[arg(long)]
    walk_replicas: Option<usize>,
}

#[derive(Debug, Args)]
struct ScanArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_delimiter = ',')]
    beta_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    h_grid: Option<Vec<f64>>,
    #[arg(long)]
    search_n: Option<usize>,
    #[arg(long)]
    search_replicas: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    n_terms: Option<usize>,
    /// Re-run with doubled budgets and report case flips.
    #[arg(long)]
    stability: bool,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn apply_model(kernel: &mut KernelKind, disorder: &mut DisorderSpec<f64>, args: ModelArgs) {
    set(kernel, args.kernel);
    set(disorder, args.disorder);
}

fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    set(&mut config.seed, cli.seed);
    if config.seed > MAX_SEED {
        return Err(CliError::Config(format!("seed must be at most {MAX_SEED}")));
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = resolve(&cli)?;
    if let Some(workers) = cli.workers {
        if workers == 0 {
            return Err(CliError::Config("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let out = commands::Output::new(cli.out_dir.clone(), config.seed)?;
    match cli.command {
        Command::Env(a) => {
            let s = &mut config.env;
            apply_model(&mut s.kernel, &mut s.disorder, a.model);
            set(&mut s.horizon, a.horizon);
            commands::env(&out, s)
        }
        Command::Walk(a) => {
            let s = &mut config.walk;
            apply_model(&mut s.kernel, &mut s.disorder, a.model);
            set(&mut s.beta, a.coupling.beta);
            set(&mut s.h, a.coupling.h);
            set(&mut s.f, a.f);
            set(&mut s.horizon, a.horizon);
            if a.target.is_some() {
                s.target = a.target;
            }
            set(&mut s.replicas, a.replicas);
            set(&mut s.step_budget, a.step_budget);
            set(&mut s.speed_steps, a.speed_steps);
            set(&mut s.speed_replicas, a.speed_replicas);
            commands::walk(&out, s)
        }
        Command::Pinning(a) => {
            let s = &mut config.pinning;
            apply_model(&mut s.kernel, &mut s.disorder, a.model);
            set(&mut s.beta, a.coupling.beta);
            set(&mut s.h, a.coupling.h);
            set(&mut s.n, a.n);
            if a.grand_canonical_f.is_some() {
                s.grand_canonical_f = a.grand_canonical_f;
            }
            s.critical |= a.critical;
            set(&mut s.search_n, a.search_n);
            set(&mut s.search_replicas, a.search_replicas);
            set(&mut s.tol, a.tol);
            commands::pinning(&out, s)
        }
        Command::Verify(a) => {
            let s = &mut config.verify;
            apply_model(&mut s.kernel, &mut s.disorder, a.model);
            set(&mut s.beta, a.coupling.beta);
            set(&mut s.h, a.coupling.h);
            set(&mut s.f, a.f);
            set(&mut s.tau_replicas, a.tau_replicas);
            set(&mut s.walk_replicas, a.walk_replicas);
            commands::verify(&out, s)
        }
        Command::Scan(a) => {
            let s = &mut config.scan;
            apply_model(&mut s.kernel, &mut s.disorder, a.model);
            set(&mut s.beta_grid, a.beta_grid);
            set(&mut s.h_grid, a.h_grid);
            set(&mut s.search_n, a.search_n);
            set(&mut s.search_replicas, a.search_replicas);
            set(&mut s.tol, a.tol);
            set(&mut s.n_terms, a.n_terms);
            s.stability |= a.stability;
            commands::scan(&out, s)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 64 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rwsre: {e}");
            ExitCode::from(e.code())
        }
    }
}
