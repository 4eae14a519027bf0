//! Command-line driver: load or generate data, then solve, trace a path,
//! benchmark screening rules, or report active-set identification.
//!
//! Exit codes are 0 on success, 1 for usage errors, 2 for data errors and 3
//! when a solve stops before reaching its tolerance.

// `!(a > b)` comparisons are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod output;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use screenkit::identification::{identify, IdentifyOptions};
use screenkit::path::{lambda_grid, solve_path};
use screenkit::solver::solve;
use screenkit::{GroupStructure, LossModel, PenaltyModel, Problem, Rule, SolveOptions};
use thiserror::Error;

use crate::dataset::{load_csv, load_libsvm, make_synthetic, DataError, Dataset};
use crate::output::{beta_hash, normalize_times, write_json, write_trace, Summary};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

/// Environment variable capping the number of concurrent benchmark cells.
pub const THREADS_ENV: &str = "SCREENKIT_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("{0}")]
    Solver(String),
    #[error("{0}")]
    NotConverged(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) | CliError::Solver(_) => EXIT_DATA,
            CliError::NotConverged(_) => EXIT_NOT_CONVERGED,
        }
    }
}

impl From<screenkit::Error> for CliError {
    fn from(e: screenkit::Error) -> Self {
        use screenkit::Error as E;
        match e {
            E::InvalidOption(_) | E::InvalidPenalty(_) | E::Unsupported(_) | E::InvalidGroups(_) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Solver(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "screenkit", version, about = "Sparse regression with safe screening rules")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve at a single regularization weight.
    Solve(SolveArgs),
    /// Solve along a decreasing grid of weights with warm starts.
    Path(PathArgs),
    /// Time screening rules over tolerances and weights.
    Bench(BenchArgs),
    /// Measure when screening identifies the optimal active set.
    Identify(IdentifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Libsvm,
    Csv,
}

#[derive(Debug, Clone, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["data", "synthetic"])))]
pub struct DataArgs {
    /// Input file (libsvm text or CSV with a header row).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Defaults to csv for `.csv` files and libsvm otherwise.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Response column of a CSV file.
    #[arg(long, default_value = "y")]
    pub target: String,
    /// Generate `N,P,K`: N samples, P features, K nonzero coefficients.
    #[arg(long, value_parser = parse_shape)]
    pub synthetic: Option<(usize, usize, usize)>,
    #[arg(long, default_value_t = 5.0)]
    pub snr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PenaltyKind {
    L1,
    Enet,
    Group,
    Nonneg,
    #[value(name = "box")]
    Boxed,
}

#[derive(Debug, Clone, Args)]
pub struct PenaltyArgs {
    #[arg(long, value_enum, default_value = "l1")]
    pub penalty: PenaltyKind,
    /// Weight as a fraction of the smallest weight giving the anchor solution.
    #[arg(long, default_value_t = 0.1)]
    pub lambda_ratio: f64,
    /// Absolute weight; overrides `--lambda-ratio`.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Ridge weight of the elastic net `λ(|β| + α·β²/2)`.
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, default_value_t = 5)]
    pub group_size: usize,
    #[arg(long, default_value_t = 0.0)]
    pub lower: f64,
    #[arg(long, default_value_t = 1.0)]
    pub upper: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Stop once the duality gap is at most `eps·‖y‖²`.
    #[arg(long, default_value_t = 1e-6)]
    pub eps: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 10)]
    pub screen_every: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub penalty: PenaltyArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value = "dynamic_gap", value_parser = parse_rule)]
    pub rule: Rule,
    /// Trace CSV, one row per gap evaluation.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Summary JSON; always printed to stdout as well.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PathArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub penalty: PenaltyArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value = "dynamic_gap", value_parser = parse_rule)]
    pub rule: Rule,
    #[arg(long, default_value_t = 10)]
    pub n_lambdas: usize,
    /// Last grid point as a fraction of the largest.
    #[arg(long, default_value_t = 0.01)]
    pub min_ratio: f64,
    /// Directory for per-point traces and `summary.json`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub penalty: PenaltyArgs,
    #[arg(long, value_delimiter = ',', default_value = "none,static,dynamic_gap,strong_then_safe,aggressive_then_safe,working_set", value_parser = parse_rule)]
    pub rules: Vec<Rule>,
    #[arg(long, value_delimiter = ',', default_value = "1e-4,1e-6,1e-8")]
    pub eps: Vec<f64>,
    /// Overrides `--lambda-ratio` with a list.
    #[arg(long, value_delimiter = ',')]
    pub lambda_ratios: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 10)]
    pub screen_every: usize,
    /// Directory for per-cell traces and `summary.json`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct IdentifyArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub penalty: PenaltyArgs,
    #[arg(long, default_value_t = 1e-12)]
    pub eps: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub reference_eps: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_epochs: usize,
    /// Report JSON; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_shape(s: &str) -> Result<(usize, usize, usize), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected N,P,K, got `{s}`"));
    }
    let num = |t: &str| t.parse::<usize>().map_err(|_| format!("invalid count `{t}`"));
    Ok((num(parts[0])?, num(parts[1])?, num(parts[2])?))
}

fn parse_rule(s: &str) -> Result<Rule, String> {
    s.trim().parse::<Rule>().map_err(|e| e.to_string())
}

/// Parse `args` (program name first), run, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Solve(a) => cmd_solve(&a),
        Command::Path(a) => cmd_path(&a),
        Command::Bench(a) => cmd_bench(&a),
        Command::Identify(a) => cmd_identify(&a),
    }
}

pub fn load_data(args: &DataArgs) -> Result<Dataset, CliError> {
    if let Some((n, p, k)) = args.synthetic {
        return Ok(make_synthetic(n, p, k, args.snr, args.seed)?.data);
    }
    let path = args
        .data
        .as_deref()
        .ok_or_else(|| CliError::Usage("one of --data or --synthetic is required".into()))?;
    let format = args.format.unwrap_or_else(|| {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Libsvm,
        }
    });
    Ok(match format {
        Format::Libsvm => load_libsvm(path)?,
        Format::Csv => load_csv(path, &args.target)?,
    })
}

/// Design, groups and loss owned together so problems can borrow them.
pub struct Setup {
    pub data: Dataset,
    pub groups: GroupStructure,
    pub loss: LossModel,
    pub args: PenaltyArgs,
}

impl Setup {
    pub fn new(data: Dataset, args: &PenaltyArgs) -> Result<Self, CliError> {
        let groups = match args.penalty {
            PenaltyKind::Group => GroupStructure::contiguous(&data.x, args.group_size)?,
            _ => GroupStructure::singletons(&data.x),
        };
        let loss = LossModel::quadratic(data.y.clone());
        Ok(Setup {
            data,
            groups,
            loss,
            args: args.clone(),
        })
    }

    fn penalty(&self, lambda: f64) -> Result<PenaltyModel, CliError> {
        Ok(match self.args.penalty {
            PenaltyKind::L1 => PenaltyModel::l1(lambda)?,
            PenaltyKind::Enet => PenaltyModel::elastic_net(lambda, self.args.alpha)?,
            PenaltyKind::Group => PenaltyModel::group_l2(lambda)?,
            PenaltyKind::Nonneg => PenaltyModel::non_negative(lambda)?,
            PenaltyKind::Boxed => PenaltyModel::boxed(self.args.lower, self.args.upper)?,
        })
    }

    /// Problem with unit weight, used for `λ_max` and paths.
    pub fn base(&self) -> Result<Problem<'_>, CliError> {
        Ok(Problem::new(&self.data.x, &self.groups, &self.loss, self.penalty(1.0)?)?)
    }

    pub fn lambda_max(&self) -> Result<f64, CliError> {
        let lmax = self.base()?.lambda_max()?;
        if !(lmax > 0.0) {
            return Err(CliError::Data(DataError::Invalid(
                "the anchor solution is optimal for every weight (λ_max = 0)".into(),
            )));
        }
        Ok(lmax)
    }

    /// Problem at `ratio·λ_max`, or at the absolute `--lambda`. Returns the
    /// ratio actually used; box constraints have none.
    pub fn problem(&self, ratio: f64) -> Result<(Problem<'_>, Option<f64>), CliError> {
        if self.args.penalty == PenaltyKind::Boxed {
            return Ok((self.base()?, None));
        }
        let lmax = self.lambda_max()?;
        let (lambda, ratio) = match self.args.lambda {
            Some(l) => (l, l / lmax),
            None => (ratio * lmax, ratio),
        };
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(CliError::Usage(format!("weight must be positive, got {lambda}")));
        }
        let problem = Problem::new(&self.data.x, &self.groups, &self.loss, self.penalty(lambda)?)?;
        Ok((problem, Some(ratio)))
    }
}

fn solver_options(rule: Rule, eps: f64, max_epochs: usize, screen_every: usize) -> SolveOptions {
    SolveOptions {
        tol: eps,
        max_epochs,
        screen_every,
        rule,
        ..Default::default()
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| {
        CliError::Data(DataError::Io {
            path: dir.display().to_string(),
            source,
        })
    })
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Solver(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn not_converged(what: &str, failed: usize) -> Result<(), CliError> {
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::NotConverged(format!(
            "{failed} {what} stopped before reaching the requested tolerance"
        )))
    }
}

fn cmd_solve(a: &SolveArgs) -> Result<(), CliError> {
    let setup = Setup::new(load_data(&a.data)?, &a.penalty)?;
    let (problem, ratio) = setup.problem(a.penalty.lambda_ratio)?;
    let opts = solver_options(a.rule, a.solver.eps, a.solver.max_epochs, a.solver.screen_every);
    let start = Instant::now();
    let (solution, trace) = solve(&problem, &opts)?;
    let seconds = start.elapsed().as_secs_f64();
    if let Some(path) = &a.trace {
        write_trace(path, &trace.rows)?;
    }
    let summary = Summary {
        rule: a.rule.name().to_string(),
        eps: a.solver.eps,
        lambda_ratio: ratio,
        epochs: solution.epochs,
        seconds,
        normalized_time: None,
        n_screened_final: solution.state.n_safe(),
        beta_hash: beta_hash(&solution.beta),
    };
    if let Some(path) = &a.summary {
        write_json(path, &summary)?;
    }
    print_json(&summary)?;
    not_converged("solve", usize::from(!solution.converged))
}

fn cmd_path(a: &PathArgs) -> Result<(), CliError> {
    let setup = Setup::new(load_data(&a.data)?, &a.penalty)?;
    let lmax = setup.lambda_max()?;
    let spec = lambda_grid(lmax, a.min_ratio, a.n_lambdas)?;
    let opts = solver_options(a.rule, a.solver.eps, a.solver.max_epochs, a.solver.screen_every);
    if let Some(dir) = &a.out_dir {
        ensure_dir(dir)?;
    }
    let points = solve_path(&setup.base()?, &spec, &opts)?;
    let mut summaries = Vec::with_capacity(points.len());
    let mut failed = 0;
    for (t, point) in points.iter().enumerate() {
        let done = match &point.outcome {
            Ok(done) => done,
            Err(e) => {
                eprintln!("warning: grid point {t} (λ = {}): {e}", point.lambda);
                failed += 1;
                continue;
            }
        };
        if !done.solution.converged {
            failed += 1;
        }
        if let Some(dir) = &a.out_dir {
            write_trace(&dir.join(format!("trace_{t:03}.csv")), &done.trace.rows)?;
        }
        let ms = done.trace.rows.last().map_or(0.0, |r| r.ms);
        summaries.push(Summary {
            rule: a.rule.name().to_string(),
            eps: a.solver.eps,
            lambda_ratio: Some(point.lambda / lmax),
            epochs: done.solution.epochs,
            seconds: ms / 1e3,
            normalized_time: None,
            n_screened_final: done.solution.state.n_safe(),
            beta_hash: beta_hash(&done.solution.beta),
        });
    }
    if let Some(dir) = &a.out_dir {
        write_json(&dir.join("summary.json"), &summaries)?;
    }
    print_json(&summaries)?;
    not_converged("grid points", failed)
}

/// Concurrency for `bench`: `SCREENKIT_THREADS` if set, else 1.
pub fn bench_threads() -> Result<usize, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        },
    }
}

fn cmd_bench(a: &BenchArgs) -> Result<(), CliError> {
    if a.rules.is_empty() || a.eps.is_empty() {
        return Err(CliError::Usage("bench needs at least one rule and one tolerance".into()));
    }
    let setup = Setup::new(load_data(&a.data)?, &a.penalty)?;
    let ratios = if a.lambda_ratios.is_empty() {
        vec![a.penalty.lambda_ratio]
    } else {
        a.lambda_ratios.clone()
    };
    let mut cells = Vec::new();
    for &ratio in &ratios {
        for &eps in &a.eps {
            for &rule in &a.rules {
                cells.push((ratio, eps, rule));
            }
        }
    }
    if let Some(dir) = &a.out_dir {
        ensure_dir(dir)?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(bench_threads()?)
        .build()
        .map_err(|e| CliError::Solver(e.to_string()))?;
    let results: Vec<Result<(Summary, bool), CliError>> = pool.install(|| {
        cells
            .par_iter()
            .enumerate()
            .map(|(c, &(ratio, eps, rule))| {
                let (problem, used_ratio) = setup.problem(ratio)?;
                let opts = solver_options(rule, eps, a.max_epochs, a.screen_every);
                let start = Instant::now();
                let (solution, trace) = solve(&problem, &opts)?;
                let seconds = start.elapsed().as_secs_f64();
                if let Some(dir) = &a.out_dir {
                    write_trace(&dir.join(format!("trace_{c:03}_{}_{eps:e}.csv", rule.name())), &trace.rows)?;
                }
                Ok((
                    Summary {
                        rule: rule.name().to_string(),
                        eps,
                        lambda_ratio: used_ratio,
                        epochs: solution.epochs,
                        seconds,
                        normalized_time: None,
                        n_screened_final: solution.state.n_safe(),
                        beta_hash: beta_hash(&solution.beta),
                    },
                    solution.converged,
                ))
            })
            .collect()
    });
    let mut summaries = Vec::with_capacity(results.len());
    let mut failed = 0;
    for r in results {
        let (s, converged) = r?;
        failed += usize::from(!converged);
        summaries.push(s);
    }
    normalize_times(&mut summaries);
    if let Some(dir) = &a.out_dir {
        write_json(&dir.join("summary.json"), &summaries)?;
    }
    print_json(&summaries)?;
    not_converged("benchmark cells", failed)
}

fn cmd_identify(a: &IdentifyArgs) -> Result<(), CliError> {
    let setup = Setup::new(load_data(&a.data)?, &a.penalty)?;
    let (problem, _) = setup.problem(a.penalty.lambda_ratio)?;
    let opts = IdentifyOptions {
        tol: a.eps,
        reference_tol: a.reference_eps,
        max_epochs: a.max_epochs,
        ..Default::default()
    };
    let report = identify(&problem, &opts)?;
    match &a.out {
        Some(path) => write_json(path, &report)?,
        None => print_json(&report)?,
    }
    not_converged("monitored solve", usize::from(!report.converged))
}
