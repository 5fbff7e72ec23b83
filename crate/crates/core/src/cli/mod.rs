//! The `hadalg` command line: `gen` writes synthetic tensors, `run` applies
//! one post-processing task to a tensor file, `bench` times the large-scale
//! experiments.
//!
//! Exit codes: 0 on success, 1 on bad input or usage, 2 when an iteration
//! was flagged as not converged.

mod bench;
mod gen;
mod run;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::algebra::TruncationPolicy;
use crate::error::{Error, Result};
use crate::iteration::StoppingRule;

pub use bench::{bench_row, bench_row_with_timeout, fit_exponent, BenchRow, BenchTask, RowSpec, RowStatus, CSV_HEADER};

#[derive(Debug, Parser)]
#[command(name = "hadalg", version, about = "Post-processing of low-rank tensors through Hadamard algebra")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic tensor file.
    Gen(GenArgs),
    /// Run one task on a tensor file and report the result.
    Run(RunArgs),
    /// Time a task over a list of orders d.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GenKind {
    RandomCp,
    RandomTt,
    PoissonRhs,
    FunctionSample,
    /// Entries bounded away from zero, for sign experiments.
    SeparatedCp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FunctionKind {
    Constant,
    Sum,
    SinProduct,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    /// Whatever the generator produces.
    Native,
    Dense,
    Tt,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(value_enum)]
    pub kind: GenKind,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
    #[arg(long, default_value_t = 1)]
    pub rank: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = FunctionKind::Constant)]
    pub function: FunctionKind,
    /// Value of the constant function.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub value: f64,
    #[arg(long, value_enum, default_value_t = OutputFormat::Native)]
    pub format: OutputFormat,
    /// Write the binary encoding instead of JSON text.
    #[arg(long)]
    pub binary: bool,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Task {
    Max,
    Min,
    Closest,
    Levelset,
    Count,
    Prob,
    Mean,
    Var,
    Condmean,
    Sign,
    Inv,
    Sqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StopArg {
    Step,
    Residual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Power,
    PowerRq,
    ExpPower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SignArg {
    NewtonSchulz,
    RobertsNewton,
}

/// Truncation and stopping settings shared by `run` and `bench`.
#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Relative truncation tolerance.
    #[arg(long, default_value_t = 1e-8)]
    pub eps: f64,
    /// Hard rank cap (default: none, or 4x the input rank for CP input).
    #[arg(long)]
    pub max_rank: Option<usize>,
    /// Recompress iterates whose rank exceeds this (default: input rank).
    #[arg(long)]
    pub trigger_rank: Option<usize>,
    #[arg(long)]
    pub stop_eta: Option<f64>,
    #[arg(long, value_enum)]
    pub stop: Option<StopArg>,
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
}

impl SolverArgs {
    pub fn policy(&self, input_rank: usize) -> Result<TruncationPolicy> {
        let trigger = self.trigger_rank.unwrap_or(input_rank.max(1));
        let p = TruncationPolicy::new(self.eps, trigger)?;
        match self.max_rank {
            Some(r) => p.with_max_rank(r),
            None => Ok(p),
        }
    }

    /// `default` applies when no `--stop` was given; `eta` when no
    /// `--stop-eta` was given.
    pub fn stopping(&self, default: StopArg, eta: f64) -> Result<StoppingRule> {
        let eta = self.stop_eta.unwrap_or(eta);
        let rule = match self.stop.unwrap_or(default) {
            StopArg::Step => StoppingRule::relative_step(eta, self.max_iters),
            StopArg::Residual => StoppingRule::residual(eta, self.max_iters),
        };
        rule.validate()?;
        Ok(rule)
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(value_enum)]
    pub task: Task,
    #[arg(long, short)]
    pub input: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Target value for `closest`.
    #[arg(long, allow_negative_numbers = true)]
    pub rho: Option<f64>,
    /// Lower end of the open interval S (default -inf).
    #[arg(long, allow_negative_numbers = true)]
    pub lower: Option<f64>,
    /// Upper end of the open interval S (default +inf).
    #[arg(long, allow_negative_numbers = true)]
    pub upper: Option<f64>,
    #[arg(long, value_enum, default_value_t = MethodArg::ExpPower)]
    pub method: MethodArg,
    #[arg(long, value_enum, default_value_t = SignArg::NewtonSchulz)]
    pub sign_method: SignArg,
    /// 1-based multi-index to exclude from max/min, comma separated; repeatable.
    #[arg(long, value_delimiter = ',', num_args = 1.., action = clap::ArgAction::Append)]
    pub deflate: Vec<usize>,
    /// Convert CP input to TT before running.
    #[arg(long)]
    pub as_tt: bool,
    /// Where tensor-valued results (levelset, sign, inv, sqrt) go.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub binary: bool,
    /// Machine-readable JSON instead of `key: value` lines.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(value_enum)]
    pub task: BenchTask,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Orders to run, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "25,50,100,150")]
    pub d: Vec<usize>,
    /// CP rank of the synthetic input; the Poisson input always has rank d.
    #[arg(long, default_value_t = 3)]
    pub rank: usize,
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Per-row limit in seconds.
    #[arg(long, default_value_t = 300.0)]
    pub timeout: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// CSV (the default) or JSON rows.
    #[arg(long, conflicts_with = "json")]
    pub csv: bool,
    #[arg(long)]
    pub json: bool,
}

/// Whether the command's iterations all converged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Converged,
    NotConverged,
}

pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<Outcome> {
    match cli.command {
        Command::Gen(a) => gen::cmd_gen(&a, out),
        Command::Run(a) => run::cmd_run(&a, out),
        Command::Bench(a) => bench::cmd_bench(&a, out),
    }
}

/// Parses `args`, runs the command and maps the result to an exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match execute(cli, &mut lock) {
        Ok(Outcome::Converged) => 0,
        Ok(Outcome::NotConverged) => 2,
        Err(Error::Divergence { report }) => {
            eprintln!("hadalg: iteration diverged after {} steps", report.iterations);
            2
        }
        Err(e) => {
            eprintln!("hadalg: {e}");
            1
        }
    }
}
