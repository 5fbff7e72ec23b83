//! Timing runs on compressed inputs far beyond dense reach.
//!
//! Every row builds its input in CP form, converts it to TT and runs the
//! task there; dense storage is never touched. Rows run one after another,
//! each on a worker thread so that a per-row timeout can be enforced.

use std::io::Write;
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use clap::ValueEnum;
use serde::Serialize;
use serde_json::json;

use super::{BenchArgs, Outcome, SolverArgs, StopArg};
use crate::algebra::AlgebraElement;
use crate::error::{Error, Result};
use crate::generate::{bubble, poisson_rhs, separated_cp};
use crate::postproc::{find_extreme, hadamard_sign, EigenMethod, SignMethod, Which};
use crate::shape::Shape;
use crate::tt::TtTensor;

/// Frozen column order of the CSV output.
pub const CSV_HEADER: &str = "d,n,rank,N,task,iterations,wall_seconds,final_rank,error_metric";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchTask {
    /// Maximum of the Poisson right-hand side (rank d); the error metric
    /// is the relative distance to the known maximum.
    Max,
    /// Maximum of a separated CP tensor of rank `--rank`; the error metric
    /// is the relative Krylov–Bogolyubov bound.
    MaxSeparated,
    /// Newton–Schulz sign of a separated CP tensor of rank `--rank`; the
    /// error metric is `|1 - v (.) v| / |w_scaled|`.
    Sign,
}

impl BenchTask {
    fn name(self) -> &'static str {
        match self {
            BenchTask::Max => "max",
            BenchTask::MaxSeparated => "max-separated",
            BenchTask::Sign => "sign",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowStatus {
    Converged,
    NotConverged,
    Timeout,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub d: usize,
    pub n: usize,
    pub rank: usize,
    /// `n^d` as an exact decimal.
    #[serde(rename = "N")]
    pub total: String,
    pub task: String,
    pub iterations: Option<usize>,
    /// Median over the repeats.
    pub wall_seconds: f64,
    pub final_rank: Option<usize>,
    pub error_metric: Option<f64>,
    /// Largest rank of any stored iterate.
    pub max_rank: Option<usize>,
    pub status: RowStatus,
}

impl BenchRow {
    fn empty(task: BenchTask, n: usize, d: usize, rank: usize) -> Result<Self> {
        Ok(Self {
            d,
            n,
            rank,
            total: Shape::uniform(n, d)?.total_size().to_string(),
            task: task.name().into(),
            iterations: None,
            wall_seconds: 0.0,
            final_rank: None,
            error_metric: None,
            max_rank: None,
            status: RowStatus::Failed,
        })
    }

    /// One CSV record. Timed-out and failed rows carry their status in the
    /// error column.
    pub fn csv_line(&self) -> String {
        let opt = |x: Option<usize>| x.map(|v| v.to_string()).unwrap_or_default();
        let metric = match (self.status, self.error_metric) {
            (RowStatus::Timeout, _) => "timeout".to_string(),
            (RowStatus::Failed, _) => "failed".to_string(),
            (_, Some(e)) => format!("{e:e}"),
            (_, None) => String::new(),
        };
        format!(
            "{},{},{},{},{},{},{:.6},{},{}",
            self.d,
            self.n,
            self.rank,
            self.total,
            self.task,
            opt(self.iterations),
            self.wall_seconds,
            opt(self.final_rank),
            metric
        )
    }
}

struct Measurement {
    iterations: usize,
    final_rank: usize,
    max_rank: usize,
    error_metric: f64,
    converged: bool,
}

fn measure(task: BenchTask, n: usize, d: usize, rank: usize, seed: u64, solver: &SolverArgs) -> Result<Measurement> {
    match task {
        BenchTask::Max | BenchTask::MaxSeparated => {
            let cp = if task == BenchTask::Max {
                poisson_rhs(n, d)?
            } else {
                separated_cp(n, d, rank, seed)?
            };
            let w = TtTensor::from_cp_rounded(&cp, 1e-14, 8)?;
            let policy = solver.policy(w.rank())?;
            let stop = solver.stopping(StopArg::Residual, (100.0 * solver.eps).max(1e-10))?;
            let r = find_extreme(&w, Which::Max, EigenMethod::ExpPower, &policy, &stop, &[])?;
            let error_metric = if task == BenchTask::Max {
                let g = bubble(n).into_iter().fold(0.0f64, f64::max);
                let exact = d as f64 * g.powi(d as i32 - 1);
                (r.entry_value - exact).abs() / exact
            } else {
                r.error_bound / r.value.abs()
            };
            Ok(Measurement {
                iterations: r.report.extra("total_iterations").map(|x| x as usize).unwrap_or(r.report.iterations),
                final_rank: r.eigenvector.rank(),
                max_rank: r.report.max_rank(),
                error_metric,
                converged: r.converged,
            })
        }
        BenchTask::Sign => {
            let cp = separated_cp(n, d, rank, seed)?;
            let w = TtTensor::from_cp_rounded(&cp, 1e-14, 8)?;
            let policy = solver.policy(w.rank())?;
            let stop = solver.stopping(StopArg::Step, (10.0 * solver.eps).max(1e-12))?;
            let (v, report) = hadamard_sign(&w, &policy, &stop, SignMethod::NewtonSchulz)?;
            Ok(Measurement {
                iterations: report.iterations,
                final_rank: v.rank(),
                max_rank: report.max_rank(),
                error_metric: report.residuals().last().copied().unwrap_or(f64::NAN),
                converged: report.converged,
            })
        }
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

/// One benchmark configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowSpec {
    pub task: BenchTask,
    pub n: usize,
    pub d: usize,
    pub rank: usize,
    pub seed: u64,
    pub repeats: usize,
}

impl RowSpec {
    /// Rank reported in the table: the Poisson input has rank d.
    fn input_rank(&self) -> usize {
        if self.task == BenchTask::Max {
            self.d
        } else {
            self.rank
        }
    }
}

/// Runs one row in the calling thread.
pub fn bench_row(spec: RowSpec, solver: &SolverArgs) -> Result<BenchRow> {
    let RowSpec {
        task,
        n,
        d,
        rank,
        seed,
        repeats,
    } = spec;
    let mut row = BenchRow::empty(task, n, d, spec.input_rank())?;
    let mut times = Vec::with_capacity(repeats.max(1));
    let mut last = None;
    for _ in 0..repeats.max(1) {
        let t0 = Instant::now();
        last = Some(measure(task, n, d, rank, seed, solver)?);
        times.push(t0.elapsed().as_secs_f64());
    }
    let m = last.expect("at least one repeat");
    row.iterations = Some(m.iterations);
    row.final_rank = Some(m.final_rank);
    row.max_rank = Some(m.max_rank);
    row.error_metric = Some(m.error_metric);
    row.wall_seconds = median(times);
    row.status = if m.converged { RowStatus::Converged } else { RowStatus::NotConverged };
    Ok(row)
}

/// Runs one row on a worker thread and gives up after `timeout`. A row
/// that times out keeps its thread running in the background until the
/// computation finishes.
pub fn bench_row_with_timeout(spec: RowSpec, solver: &SolverArgs, timeout: Duration) -> Result<BenchRow> {
    let RowSpec { task, n, d, .. } = spec;
    let rank = spec.input_rank();
    let (tx, rx) = mpsc::channel();
    let solver = solver.clone();
    thread::spawn(move || {
        let _ = tx.send(bench_row(spec, &solver));
    });
    match rx.recv_timeout(timeout) {
        Ok(Ok(row)) => Ok(row),
        Ok(Err(e)) => {
            let mut row = BenchRow::empty(task, n, d, rank)?;
            eprintln!("hadalg: row d={d} failed: {e}");
            row.status = RowStatus::Failed;
            Ok(row)
        }
        Err(_) => {
            let mut row = BenchRow::empty(task, n, d, rank)?;
            row.wall_seconds = timeout.as_secs_f64();
            row.status = RowStatus::Timeout;
            Ok(row)
        }
    }
}

/// Least-squares slope of `ln(wall_seconds)` against `ln(d)` over the
/// finished rows.
pub fn fit_exponent(rows: &[BenchRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| matches!(r.status, RowStatus::Converged | RowStatus::NotConverged) && r.wall_seconds > 0.0)
        .map(|r| ((r.d as f64).ln(), r.wall_seconds.ln()))
        .collect();
    let k = pts.len() as f64;
    if pts.len() < 2 {
        return None;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub(super) fn cmd_bench(a: &BenchArgs, out: &mut dyn Write) -> Result<Outcome> {
    if a.n == 0 || a.rank == 0 || a.d.iter().any(|&d| d == 0) {
        return Err(Error::InvalidParameter("n, d and rank must be >= 1".into()));
    }
    if !(a.timeout > 0.0) {
        return Err(Error::InvalidParameter(format!("timeout must be > 0, got {}", a.timeout)));
    }
    let mut ds = a.d.clone();
    ds.sort_unstable();
    ds.dedup();
    let timeout = Duration::from_secs_f64(a.timeout);
    let mut rows = Vec::with_capacity(ds.len());
    if !a.json {
        writeln!(out, "{CSV_HEADER}")?;
    }
    for &d in &ds {
        let spec = RowSpec {
            task: a.task,
            n: a.n,
            d,
            rank: a.rank,
            seed: a.seed,
            repeats: a.repeats,
        };
        let row = bench_row_with_timeout(spec, &a.solver, timeout)?;
        if !a.json {
            writeln!(out, "{}", row.csv_line())?;
            out.flush()?;
        }
        rows.push(row);
    }
    let fit = fit_exponent(&rows);
    if a.json {
        writeln!(out, "{}", json!({ "rows": rows, "fitted_exponent": fit }))?;
    } else if let Some(p) = fit {
        eprintln!("fitted exponent of wall time in d: {p:.3}");
    }
    let all_ok = rows.iter().all(|r| r.status == RowStatus::Converged);
    Ok(if all_ok { Outcome::Converged } else { Outcome::NotConverged })
}
