//! Fixed-point iteration with truncation between steps, and its stopping
//! rules.
//!
//! Each step applies the iteration map, recompresses when the
//! representation rank exceeds the policy's trigger, and then checks the
//! stopping rule. A superlinearly convergent map keeps its speed under
//! truncation and stagnates in an `eps`-neighbourhood of the fixed point; a
//! linearly convergent one with contraction `q` stagnates within
//! `eps / (1 - q)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::algebra::{AlgebraElement, TruncationPolicy};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopKind {
    /// `|F(v_i)| < eta`, where `F` is supplied by the iteration map.
    Residual,
    /// `|v_i - v_{i-1}| / |v_i| < |v_i|^p * eta`.
    RelativeStep,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingRule {
    pub kind: StopKind,
    pub eta: f64,
    pub p_exponent: i32,
    pub max_iters: usize,
}

impl Default for StoppingRule {
    fn default() -> Self {
        Self {
            kind: StopKind::RelativeStep,
            eta: 1e-10,
            p_exponent: 0,
            max_iters: 100,
        }
    }
}

impl StoppingRule {
    pub fn relative_step(eta: f64, max_iters: usize) -> Self {
        Self {
            kind: StopKind::RelativeStep,
            eta,
            p_exponent: 0,
            max_iters,
        }
    }

    pub fn residual(eta: f64, max_iters: usize) -> Self {
        Self {
            kind: StopKind::Residual,
            eta,
            p_exponent: 0,
            max_iters,
        }
    }

    pub fn with_p(mut self, p: i32) -> Self {
        self.p_exponent = p;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) {
            return Err(Error::InvalidParameter(format!("eta must be > 0, got {}", self.eta)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
        }
        if !(0..=2).contains(&self.p_exponent) {
            return Err(Error::InvalidParameter(format!(
                "p exponent must be 0, 1 or 2, got {}",
                self.p_exponent
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Relative step `delta_i`.
    pub delta: f64,
    /// `|F(v_i)|` when the map defines a residual.
    pub residual: Option<f64>,
    pub rank_before: usize,
    pub rank_after: usize,
    pub truncated: bool,
    pub tolerance_miss: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub iterations: usize,
    pub step_history: Vec<StepRecord>,
    pub converged: bool,
    /// Last stopping criterion value (`delta_i` or `|F(v_i)|`).
    pub final_residual: f64,
    pub extras: BTreeMap<String, f64>,
}

impl IterationReport {
    fn push(&mut self, step: StepRecord) {
        self.step_history.push(step);
        self.iterations = self.step_history.len();
    }

    /// Largest representation rank of any stored iterate.
    pub fn max_rank(&self) -> usize {
        self.step_history.iter().map(|s| s.rank_after).max().unwrap_or(0)
    }

    /// Largest rank produced by the map before recompression.
    pub fn max_raw_rank(&self) -> usize {
        self.step_history.iter().map(|s| s.rank_before).max().unwrap_or(0)
    }

    pub fn deltas(&self) -> Vec<f64> {
        self.step_history.iter().map(|s| s.delta).collect()
    }

    pub fn residuals(&self) -> Vec<f64> {
        self.step_history.iter().filter_map(|s| s.residual).collect()
    }

    pub fn extra(&self, key: &str) -> Option<f64> {
        self.extras.get(key).copied()
    }
}

/// Iteration function `Phi_P` used inside [`truncated_fixed_point`].
pub trait IterationMap<E: AlgebraElement> {
    fn apply(&mut self, v: &E) -> Result<E>;

    /// `|F(v)|` for maps that solve an equation `F(v) = 0`.
    fn residual(&mut self, _v: &E) -> Option<Result<f64>> {
        None
    }

    /// Named side results (Rayleigh quotients, bounds) merged into the
    /// final report.
    fn extras(&self) -> Vec<(String, f64)> {
        Vec::new()
    }
}

impl<E, F> IterationMap<E> for F
where
    E: AlgebraElement,
    F: FnMut(&E) -> Result<E>,
{
    fn apply(&mut self, v: &E) -> Result<E> {
        self(v)
    }
}

/// `|F(v)| < eta`.
pub fn residual_stop<E: AlgebraElement>(f_of_v: &E, eta: f64) -> bool {
    f_of_v.norm() < eta
}

/// `delta = |v_curr - v_prev| / |v_curr| < |v_curr|^p * eta`.
pub fn step_stop<E: AlgebraElement>(v_prev: &E, v_curr: &E, eta: f64, p: i32) -> Result<bool> {
    let norm = v_curr.norm();
    if norm == 0.0 {
        return Err(Error::DegenerateIterate("current iterate has zero norm".into()));
    }
    let delta = v_curr.distance(v_prev)? / norm;
    Ok(delta < norm.powi(p) * eta)
}

/// Runs `v_{i+1} = T_eps(Phi(v_i))` from `v0` until the stopping rule fires
/// or `max_iters` is reached.
///
/// Exhausting `max_iters` is not an error: the last iterate comes back with
/// `converged = false`. A non-finite iterate aborts with
/// [`Error::Divergence`] carrying the partial report.
pub fn truncated_fixed_point<E, M>(
    phi: &mut M,
    v0: E,
    policy: &TruncationPolicy,
    stop: &StoppingRule,
) -> Result<(E, IterationReport)>
where
    E: AlgebraElement,
    M: IterationMap<E> + ?Sized,
{
    policy.validate()?;
    stop.validate()?;
    let mut report = IterationReport::default();
    if !v0.norm().is_finite() {
        return Err(Error::Divergence {
            report: Box::new(report),
        });
    }

    let mut v = v0;
    for _ in 0..stop.max_iters {
        let z = phi.apply(&v)?;
        let rank_before = z.rank();
        let (z, truncated, tolerance_miss) = if rank_before > policy.trigger_rank {
            let t = match z.truncate(policy) {
                Ok(t) => t,
                // A blown-up iterate usually surfaces first inside the
                // recompression; report it as the divergence it is.
                Err(_) if !z.norm().is_finite() => {
                    merge_extras(&mut report, phi.extras());
                    return Err(Error::Divergence {
                        report: Box::new(report),
                    });
                }
                Err(e) => return Err(e),
            };
            (t.value, true, t.tolerance_miss)
        } else {
            (z, false, false)
        };

        let norm = z.norm();
        let residual = match phi.residual(&z) {
            Some(r) => Some(r?),
            None => None,
        };
        let delta = if norm > 0.0 {
            z.distance(&v)? / norm
        } else {
            f64::NAN
        };
        let finite = norm.is_finite() && residual.map_or(true, f64::is_finite);
        report.push(StepRecord {
            delta,
            residual,
            rank_before,
            rank_after: z.rank(),
            truncated,
            tolerance_miss,
        });
        if !finite {
            merge_extras(&mut report, phi.extras());
            return Err(Error::Divergence {
                report: Box::new(report),
            });
        }

        let (criterion, done) = match stop.kind {
            StopKind::Residual => {
                let r = residual.ok_or_else(|| {
                    Error::InvalidParameter("residual stopping needs a map with a residual".into())
                })?;
                (r, r < stop.eta)
            }
            StopKind::RelativeStep => {
                if norm == 0.0 {
                    return Err(Error::DegenerateIterate(
                        "iterate collapsed to zero".into(),
                    ));
                }
                (delta, delta < norm.powi(stop.p_exponent) * stop.eta)
            }
        };
        report.final_residual = criterion;
        v = z;
        if done {
            report.converged = true;
            break;
        }
    }
    merge_extras(&mut report, phi.extras());
    Ok((v, report))
}

fn merge_extras(report: &mut IterationReport, extras: Vec<(String, f64)>) {
    report.extras.extend(extras);
}
