//! Command-line front end: `fit`, `simulate` and `version`.
//!
//! Exit codes: 0 success, 1 bad arguments or input, 2 solver failure (or
//! too many failed replications), 3 collinear treatments.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

pub mod csvio;
pub mod report;

use csvio::Table;
use orthoreg::{
    run_monte_carlo, two_step_fit, Dataset, PenaltyPlan, SimulationConfig, SolverOptions,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("solver failed: {0}")]
    Solver(String),
    #[error("{0}")]
    Collinear(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Solver(_) => 2,
            CliError::Collinear(_) => 3,
        }
    }
}

impl From<orthoreg::Error> for CliError {
    fn from(e: orthoreg::Error) -> Self {
        use orthoreg::Error as E;
        match e {
            E::Collinear { .. } => CliError::Collinear(e.to_string()),
            E::NumericalFailure(_) | E::TooManyFailures { .. } => CliError::Solver(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "orthoreg",
    about = "Outlier-robust inference in high-dimensional linear models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate treatment effects from a CSV file.
    Fit(FitArgs),
    /// Run a Monte Carlo study on the built-in design.
    Simulate(SimulateArgs),
    /// Print the version.
    Version,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub outcome: String,
    /// Comma-separated treatment columns, in order.
    #[arg(long, value_delimiter = ',', required = true)]
    pub treatments: Vec<String>,
    /// Comma-separated control columns, or "rest" for every other column.
    #[arg(long, value_delimiter = ',', default_value = "rest")]
    pub controls: Vec<String>,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Constant c > 1 in the default penalty levels.
    #[arg(long, default_value_t = 1.01)]
    pub penalty_c: f64,
    /// Coefficient penalties: one value for all regressions or K+1 values
    /// (outcome first).
    #[arg(long, value_delimiter = ',')]
    pub lambda_beta: Option<Vec<f64>>,
    /// Outlier penalties, same layout as --lambda-beta; 0 disables the
    /// outlier shifts.
    #[arg(long, value_delimiter = ',')]
    pub lambda_gamma: Option<Vec<f64>>,
    #[arg(long, default_value_t = 10)]
    pub max_outer_iters: usize,
    /// KKT tolerance of the inner lasso.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Output file; standard output if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    #[arg(long, default_value_t = 500)]
    pub p: usize,
    /// Outlier propensity.
    #[arg(long, default_value_t = 0.005)]
    pub eps: f64,
    /// Outlier magnitude.
    #[arg(long, default_value_t = 20.0)]
    pub z: f64,
    /// True treatment effect.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[arg(long, default_value_t = 1.01)]
    pub penalty_c: f64,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, default_value_t = 10)]
    pub max_outer_iters: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Skip the non-robust baseline.
    #[arg(long)]
    pub no_biased: bool,
    /// JSON report path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-replication CSV path.
    #[arg(long)]
    pub records: Option<PathBuf>,
}

/// Parses arguments and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Fit(args) => cmd_fit(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Version => {
            println!("orthoreg {}", env!("CARGO_PKG_VERSION"));
            Ok(())
        }
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn resolve_controls(args: &FitArgs, table: &Table) -> Result<Vec<String>, CliError> {
    let taken = |c: &String| *c == args.outcome || args.treatments.contains(c);
    if args.controls.len() == 1 && args.controls[0] == "rest" {
        return Ok(table
            .headers
            .iter()
            .filter(|h| !taken(h))
            .cloned()
            .collect());
    }
    for c in &args.controls {
        if taken(c) {
            return Err(CliError::Input(format!(
                "column \"{c}\" is listed as a control and as the outcome or a treatment"
            )));
        }
    }
    Ok(args.controls.clone())
}

fn check_columns(args: &FitArgs, table: &Table, controls: &[String]) -> Result<(), CliError> {
    if args.treatments.contains(&args.outcome) {
        return Err(CliError::Input(format!(
            "column \"{}\" is both the outcome and a treatment",
            args.outcome
        )));
    }
    let mut seen = std::collections::HashSet::new();
    for c in args.treatments.iter().chain(controls) {
        if !seen.insert(c) {
            return Err(CliError::Input(format!("column \"{c}\" is listed twice")));
        }
    }
    for c in std::iter::once(&args.outcome)
        .chain(&args.treatments)
        .chain(controls)
    {
        if !table.has(c) {
            return Err(CliError::Input(format!(
                "column \"{c}\" not found in header"
            )));
        }
    }
    Ok(())
}

fn expand(values: &[f64], k: usize, flag: &str) -> Result<Vec<f64>, CliError> {
    match values.len() {
        1 => Ok(vec![values[0]; k + 1]),
        m if m == k + 1 => Ok(values.to_vec()),
        m => Err(CliError::Input(format!(
            "--{flag} takes 1 or {} values, got {m}",
            k + 1
        ))),
    }
}

/// Builds the penalty plan from the defaults and any overrides.
pub fn penalty_plan(args: &FitArgs, n: usize, p: usize) -> Result<PenaltyPlan<f64>, CliError> {
    let k = args.treatments.len();
    let base = PenaltyPlan::default_for(n, p, k, args.penalty_c)?;
    let lb = match &args.lambda_beta {
        Some(v) => expand(v, k, "lambda-beta")?,
        None => base.lambda_beta,
    };
    let lg = match &args.lambda_gamma {
        Some(v) => expand(v, k, "lambda-gamma")?,
        None => base.lambda_gamma,
    };
    Ok(PenaltyPlan::new(lb, lg, args.penalty_c)?)
}

/// Reads the CSV and assembles the dataset, returning it with the control
/// names actually used.
pub fn load_dataset(args: &FitArgs) -> Result<(Dataset<f64>, Vec<String>), CliError> {
    let table = Table::read(&args.data)?;
    let controls = resolve_controls(args, &table)?;
    check_columns(args, &table, &controls)?;
    let y = table.column(&args.outcome)?;
    let d = table.columns(&args.treatments)?;
    let x = table.columns(&controls)?;
    Ok((Dataset::new(y, d, x)?, controls))
}

fn write_output(path: Option<&Path>, body: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, body)
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(body.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Input(format!("cannot write to standard output: {e}")))
        }
    }
}

pub fn cmd_fit(args: &FitArgs) -> Result<(), CliError> {
    let (data, controls) = load_dataset(args)?;
    let plan = penalty_plan(args, data.n(), data.p())?;
    let opts = SolverOptions {
        max_outer_iters: args.max_outer_iters,
        lasso_tol: args.tol,
        ..SolverOptions::default()
    };
    opts.validate()?;
    let result = two_step_fit(&data, &plan, &opts, args.level)?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    let report = report::FitReport::new(args, &controls, &plan, &opts, &result);
    let body = match args.format {
        Format::Json => report.to_json(),
        Format::Csv => report.to_csv(),
    };
    write_output(args.out.as_deref(), &body)
}

pub fn simulation_config(args: &SimulateArgs) -> SimulationConfig {
    SimulationConfig {
        n: args.n,
        p: args.p,
        eps: args.eps,
        z: args.z,
        alpha_true: args.alpha,
        reps: args.reps,
        seed: args.seed,
        c_const: args.penalty_c,
        level: args.level,
        outer_iters: args.max_outer_iters,
        lasso_tol: args.tol,
        include_biased_baseline: !args.no_biased,
        workers: args.threads,
    }
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let config = simulation_config(args);
    let report = run_monte_carlo::<f64>(&config)?;
    print!("{}", report.format_table());
    eprintln!(
        "{} replications ({} failed) in {:.1}s",
        report.reps_completed + report.reps_failed,
        report.reps_failed,
        report.wall_time_secs
    );
    if let Some(path) = &args.out {
        let body = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
        write_output(Some(path), &body)?;
    }
    if let Some(path) = &args.records {
        write_output(Some(path), &report.records_csv())?;
    }
    Ok(())
}
