use std::io::Write;

use serde_json::{json, Map, Value};

use super::{MethodArg, Outcome, RunArgs, SignArg, StopArg, Task};
use crate::algebra::{uniform_mean, AlgebraElement};
use crate::error::{Error, Result};
use crate::io::{read_tensor, write_tensor, Encoding, TensorData};
use crate::iteration::IterationReport;
use crate::postproc::{
    characteristic_with, closest_to, conditional_mean_of, find_extreme, hadamard_inverse, hadamard_sign,
    hadamard_sqrt, mean_variance, probability_of, support_cardinality, EigenMethod, ExtremeResult, Interval,
    SignMethod, Which,
};
use crate::shape::MultiIndex;
use crate::tt::TtTensor;

/// Default stopping threshold for the eigenvalue searches, which stop on
/// the relative Krylov–Bogolyubov bound.
fn eigen_eta(eps: f64) -> f64 {
    (100.0 * eps).max(1e-10)
}

/// Default relative-step threshold for the quadratically convergent
/// function iterations; truncation keeps steps from dropping far below
/// `eps`.
fn step_eta(eps: f64) -> f64 {
    (10.0 * eps).max(1e-12)
}

/// Result of one task: report fields, convergence, and an optional tensor.
pub(super) struct TaskOutput {
    pub fields: Map<String, Value>,
    pub converged: bool,
    pub tensor: Option<TensorData>,
}

fn interval(a: &RunArgs) -> Result<Interval> {
    match (a.lower, a.upper) {
        (None, None) => Ok(Interval::full()),
        (l, u) => Interval::new(l.unwrap_or(f64::NEG_INFINITY), u.unwrap_or(f64::INFINITY)),
    }
}

fn deflation(a: &RunArgs, d: usize) -> Result<Vec<MultiIndex>> {
    if a.deflate.len() % d != 0 {
        return Err(Error::InvalidParameter(format!(
            "--deflate needs groups of {d} indices, got {}",
            a.deflate.len()
        )));
    }
    a.deflate.chunks(d).map(MultiIndex::from_one_based).collect()
}

fn reports_json(reports: &[IterationReport]) -> Value {
    serde_json::to_value(reports).unwrap_or(Value::Null)
}

fn extreme_fields<E: AlgebraElement>(r: &ExtremeResult<E>, fields: &mut Map<String, Value>) {
    fields.insert("value".into(), json!(r.value));
    fields.insert("entry_value".into(), json!(r.entry_value));
    fields.insert("index".into(), json!(r.index.one_based()));
    fields.insert("error_bound".into(), json!(r.error_bound));
    fields.insert("validated".into(), json!(r.validated));
    let iterations = r.report.extra("total_iterations").map(|x| x as usize).unwrap_or(r.report.iterations);
    fields.insert("iterations".into(), json!(iterations));
    fields.insert("max_rank".into(), json!(r.report.max_rank()));
    fields.insert("final_rank".into(), json!(r.eigenvector.rank()));
    fields.insert("reports".into(), reports_json(std::slice::from_ref(&r.report)));
}

fn sign_method(a: &RunArgs) -> SignMethod {
    match a.sign_method {
        SignArg::NewtonSchulz => SignMethod::NewtonSchulz,
        SignArg::RobertsNewton => SignMethod::RobertsNewton,
    }
}

/// Rank cap for CP inputs when `--max-rank` is absent. ALS rarely reaches
/// tight tolerances below the exact rank, and without a cap the Newton-type
/// iterations then keep every term and grow combinatorially.
const CP_DEFAULT_RANK_FACTOR: usize = 4;

pub(super) fn run_task<E>(w: &E, a: &RunArgs, default_cap: Option<usize>) -> Result<TaskOutput>
where
    E: AlgebraElement + Into<TensorData>,
{
    let mut policy = a.solver.policy(w.rank())?;
    if let (None, Some(cap)) = (policy.max_rank, default_cap) {
        policy = policy.with_max_rank(cap.max(policy.trigger_rank))?;
    }
    let eps = a.solver.eps;
    let mut fields = Map::new();
    let mut converged = true;
    let mut tensor = None;
    match a.task {
        Task::Max | Task::Min | Task::Closest => {
            let stop = a.solver.stopping(StopArg::Residual, eigen_eta(eps))?;
            let r = if a.task == Task::Closest {
                let rho = a
                    .rho
                    .ok_or_else(|| Error::InvalidParameter("closest needs --rho".into()))?;
                let r = closest_to(w, rho, &policy, &stop)?;
                fields.insert("rho".into(), json!(rho));
                fields.insert("exact_hit".into(), json!(r.exact_hit));
                r
            } else {
                let which = if a.task == Task::Max { Which::Max } else { Which::Min };
                let method = match a.method {
                    MethodArg::Power => EigenMethod::Power,
                    MethodArg::PowerRq => EigenMethod::PowerRq,
                    MethodArg::ExpPower => EigenMethod::ExpPower,
                };
                let deflate = deflation(a, w.shape().order())?;
                find_extreme(w, which, method, &policy, &stop, &deflate)?
            };
            converged = r.converged;
            extreme_fields(&r, &mut fields);
        }
        Task::Levelset | Task::Count | Task::Prob | Task::Condmean => {
            let stop = a.solver.stopping(StopArg::Step, step_eta(eps))?;
            let s = interval(a)?;
            let (chi, reports) = characteristic_with(w, &s, &policy, &stop, sign_method(a))?;
            converged = reports.iter().all(|r| r.converged);
            fields.insert("lower".into(), json!(s.lower.is_finite().then_some(s.lower)));
            fields.insert("upper".into(), json!(s.upper.is_finite().then_some(s.upper)));
            let card = support_cardinality(&chi)?;
            fields.insert("count".into(), json!(card.rounded.to_string()));
            fields.insert("count_raw".into(), json!(card.raw));
            match a.task {
                Task::Prob => {
                    fields.insert("probability".into(), json!(probability_of(&chi)?));
                }
                Task::Condmean => {
                    fields.insert("conditional_mean".into(), json!(conditional_mean_of(w, &chi)?));
                }
                Task::Levelset => {
                    let l = chi.hadamard(w)?.truncate_if_needed(&policy)?.value;
                    fields.insert("final_rank".into(), json!(l.rank()));
                    tensor = Some(l.into());
                }
                _ => {}
            }
            fields.insert("characteristic_rank".into(), json!(chi.rank()));
            let iterations = reports.iter().map(|r| r.iterations).max().unwrap_or(0);
            fields.insert("iterations".into(), json!(iterations));
            fields.insert("max_rank".into(), json!(reports.iter().map(|r| r.max_rank()).max().unwrap_or(0)));
            fields.insert("reports".into(), reports_json(&reports));
        }
        Task::Mean | Task::Var => {
            if a.task == Task::Mean {
                fields.insert("mean".into(), json!(uniform_mean(w)?));
            } else {
                let (mean, var) = mean_variance(w)?;
                fields.insert("mean".into(), json!(mean));
                fields.insert("variance".into(), json!(var));
            }
        }
        Task::Sign | Task::Inv | Task::Sqrt => {
            let stop = a.solver.stopping(StopArg::Step, step_eta(eps))?;
            let (v, report) = match a.task {
                Task::Sign => hadamard_sign(w, &policy, &stop, sign_method(a))?,
                Task::Inv => hadamard_inverse(w, &policy, &stop)?,
                _ => hadamard_sqrt(w, &policy, &stop)?,
            };
            converged = report.converged;
            for (k, x) in &report.extras {
                fields.insert(k.clone(), json!(x));
            }
            fields.insert("iterations".into(), json!(report.iterations));
            fields.insert("max_rank".into(), json!(report.max_rank()));
            fields.insert("final_rank".into(), json!(v.rank()));
            fields.insert("reports".into(), reports_json(std::slice::from_ref(&report)));
            tensor = Some(v.into());
        }
    }
    Ok(TaskOutput {
        fields,
        converged,
        tensor,
    })
}

pub(super) fn run_on(t: &TensorData, a: &RunArgs) -> Result<TaskOutput> {
    match t {
        TensorData::Dense(w) => run_task(w, a, None),
        TensorData::Cp(w) if a.as_tt => run_task(&TtTensor::from_cp_rounded(w, 1e-14, 8)?, a, None),
        TensorData::Cp(w) => run_task(w, a, Some(CP_DEFAULT_RANK_FACTOR * w.rank())),
        TensorData::Tt(w) => run_task(w, a, None),
    }
}

fn plain(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => "-".into(),
        other => other.to_string(),
    }
}

pub(super) fn cmd_run(a: &RunArgs, out: &mut dyn Write) -> Result<Outcome> {
    let t = read_tensor(&a.input)?;
    let result = run_on(&t, a)?;
    if let (Some(path), Some(tensor)) = (&a.out, &result.tensor) {
        let encoding = if a.binary { Encoding::Binary } else { Encoding::Text };
        write_tensor(path, tensor, encoding)?;
    }
    let mut report = Map::new();
    report.insert("task".into(), json!(format!("{:?}", a.task).to_lowercase()));
    report.insert("format".into(), json!(t.format()));
    report.insert("shape".into(), json!(t.shape().mode_sizes()));
    report.insert("N".into(), json!(t.shape().total_size().to_string()));
    report.insert("converged".into(), json!(result.converged));
    report.extend(result.fields);
    if a.json {
        writeln!(out, "{}", Value::Object(report))?;
    } else {
        for (k, v) in &report {
            if k != "reports" {
                writeln!(out, "{k}: {}", plain(v))?;
            }
        }
    }
    Ok(if result.converged { Outcome::Converged } else { Outcome::NotConverged })
}
