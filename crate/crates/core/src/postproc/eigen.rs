//! Extreme entries as eigenpairs of the multiplication operator `v -> w (.) v`.
//!
//! The eigenvalues of that operator are the entries of `w` and its
//! eigenvectors are the canonical unit tensors `e^(m)`, so the dominant
//! eigenpair of a power iteration yields both the largest-modulus entry
//! and its position.

use serde::{Deserialize, Serialize};

use super::functions::{hadamard_inverse, sup_norm_estimate};
use crate::algebra::{AlgebraElement, TruncationPolicy};
use crate::dense::DenseTensor;
use crate::error::{Error, Result};
use crate::iteration::{truncated_fixed_point, IterationMap, IterationReport, StoppingRule};
use crate::shape::MultiIndex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Which {
    Max,
    Min,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EigenMethod {
    /// Plain power iteration, Rayleigh quotient only at the end.
    Power,
    /// Power iteration with the Rayleigh quotient every step.
    PowerRq,
    /// `v_i ~ w^(2^i)`: each step squares the iterate.
    #[default]
    ExpPower,
}

/// Result of one normalised power-type step.
#[derive(Debug, Clone)]
pub struct RqStep<E> {
    pub next: E,
    pub rho1: f64,
    pub rho2: f64,
    pub eps_lambda: f64,
}

/// `(rho_2 - rho_1^2)^(1/2)`, clamped at zero against round-off.
fn kb_eps(rho1: f64, rho2: f64) -> f64 {
    (rho2 - rho1 * rho1).max(0.0).sqrt()
}

/// One step of the power method: `u = w (.) v`, `gamma = |u|^-1`.
/// Returns `gamma u`; `1 / gamma` estimates the dominant modulus.
pub fn power_step<E: AlgebraElement>(w: &E, v: &E) -> Result<(E, f64)> {
    let u = w.hadamard(v)?;
    let n = u.norm();
    if n == 0.0 || !n.is_finite() {
        return Err(Error::Breakdown(format!("|w (.) v| = {n}")));
    }
    let gamma = 1.0 / n;
    Ok((u.scale(gamma), gamma))
}

/// Power step with Rayleigh quotient `rho_1 = <u, v>`, `rho_2 = <u, u>` and
/// error bound `eps_lambda`.
pub fn power_rq_step<E: AlgebraElement>(w: &E, v: &E) -> Result<RqStep<E>> {
    let u = w.hadamard(v)?;
    let vv = v.inner(v)?;
    let rho1 = u.inner(v)? / vv;
    let rho2 = u.inner(&u)? / vv;
    if !(rho2 > 0.0) {
        return Err(Error::Breakdown(format!("rho_2 = {rho2}")));
    }
    let n = u.norm();
    Ok(RqStep {
        next: u.scale(1.0 / n),
        rho1,
        rho2,
        eps_lambda: kb_eps(rho1, rho2),
    })
}

/// Exponentiated power step with `y = w^(.2)` precomputed: `u = v (.) v`,
/// `rho_1 = <w, u>`, `rho_2 = <y, u>`.
pub fn exp_power_step<E: AlgebraElement>(w: &E, y: &E, v: &E) -> Result<RqStep<E>> {
    let u = v.hadamard(v)?;
    let vv = v.inner(v)?;
    let n = u.norm();
    if n == 0.0 || !n.is_finite() {
        return Err(Error::Breakdown(format!("|v (.) v| = {n}")));
    }
    let rho1 = w.inner(&u)? / vv;
    let rho2 = y.inner(&u)? / vv;
    Ok(RqStep {
        next: u.scale(1.0 / n),
        rho1,
        rho2,
        eps_lambda: kb_eps(rho1, rho2),
    })
}

/// Krylov-Bogolyubov data for a trial vector: some entry of `w` lies
/// within `eps_lambda` of `rho1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KbBound {
    pub rho1: f64,
    pub eps_lambda: f64,
}

impl KbBound {
    /// Checks `min_m |w_m - rho1| <= eps_lambda` against full data.
    pub fn holds_for(&self, w: &DenseTensor) -> bool {
        let slack = 1e-12 * (self.rho1.abs() + self.eps_lambda);
        w.spectral_distance(self.rho1) <= self.eps_lambda + slack
    }
}

pub fn kb_bound<E: AlgebraElement>(w: &E, v: &E) -> Result<KbBound> {
    let u = w.hadamard(v)?;
    let vv = v.inner(v)?;
    if !(vv > 0.0) {
        return Err(Error::DegenerateIterate("trial vector is zero".into()));
    }
    let rho1 = u.inner(v)? / vv;
    // Same value as (rho2 - rho1^2)^(1/2), without the cancellation that
    // leaves ~1e-8 |rho1| at exact eigenvectors.
    let eps_lambda = u.distance(&v.scale(rho1))? / vv.sqrt();
    Ok(KbBound { rho1, eps_lambda })
}

#[derive(Debug, Clone)]
pub struct ExtremeResult<E> {
    /// Eigenvalue estimate from the final Rayleigh quotient.
    pub value: f64,
    /// `w` read back at `index`.
    pub entry_value: f64,
    pub index: MultiIndex,
    /// `eps_lambda` of the final iterate.
    pub error_bound: f64,
    pub report: IterationReport,
    pub eigenvector: E,
    pub converged: bool,
    /// `entry_value` agrees with `value` within `error_bound`.
    pub validated: bool,
    /// Set by [`closest_to`] when some entry equals the target (numerically).
    pub exact_hit: bool,
}

struct EigenMap<'a, E> {
    w: &'a E,
    y: Option<E>,
    method: EigenMethod,
    policy: TruncationPolicy,
    last: Option<(f64, f64, f64)>,
    /// Products formed for the residual of an iterate, reused by the next step.
    cache: Option<(E, E, f64, f64)>,
}

impl<E: AlgebraElement> EigenMap<'_, E> {
    /// `u` and the Rayleigh data at `v`: `u = w (.) v` for the power
    /// methods and `u = T(v (.) v)` for exp-power.
    fn stats(&mut self, v: &E) -> Result<(E, f64, f64)> {
        if let Some((key, u, rho1, rho2)) = self.cache.take() {
            if &key == v {
                return Ok((u, rho1, rho2));
            }
        }
        let vv = v.inner(v)?;
        if !(vv > 0.0) {
            return Err(Error::DegenerateIterate("iterate vanished".into()));
        }
        match self.method {
            EigenMethod::ExpPower => {
                let y = self.y.as_ref().expect("squared input set for exp-power");
                let u = v.hadamard(v)?.truncate_if_needed(&self.policy)?.value;
                let rho1 = self.w.inner(&u)? / vv;
                let rho2 = y.inner(&u)? / vv;
                Ok((u, rho1, rho2))
            }
            EigenMethod::Power | EigenMethod::PowerRq => {
                let u = self.w.hadamard(v)?.truncate_if_needed(&self.policy)?.value;
                let rho1 = u.inner(v)? / vv;
                let rho2 = u.inner(&u)? / vv;
                Ok((u, rho1, rho2))
            }
        }
    }
}

impl<E: AlgebraElement> IterationMap<E> for EigenMap<'_, E> {
    fn apply(&mut self, v: &E) -> Result<E> {
        let (u, rho1, rho2) = self.stats(v)?;
        let n = u.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::Breakdown(format!("|u| = {n}")));
        }
        self.last = Some((rho1, rho2, kb_eps(rho1, rho2)));
        // For the power methods, fixing the sign keeps a negative dominant
        // entry from making the iterates alternate.
        let s = match self.method {
            EigenMethod::ExpPower => 1.0,
            _ if rho1 < 0.0 => -1.0,
            _ => 1.0,
        };
        Ok(u.scale(s / n))
    }

    /// Relative eigen-residual `|w (.) v - rho_1 v| / |w (.) v|`, that is
    /// `eps_lambda / sqrt(rho_2)`.
    fn residual(&mut self, v: &E) -> Option<Result<f64>> {
        let r = self.stats(v).map(|(u, rho1, rho2)| {
            self.cache = Some((v.clone(), u, rho1, rho2));
            kb_eps(rho1, rho2) / rho2.sqrt()
        });
        Some(r)
    }

    fn extras(&self) -> Vec<(String, f64)> {
        match self.last {
            Some((rho1, rho2, eps)) => vec![
                ("rho1".into(), rho1),
                ("rho2".into(), rho2),
                ("eps_lambda".into(), eps),
            ],
            None => Vec::new(),
        }
    }
}

/// Dominant (largest modulus) eigenpair of `v -> t (.) v`.
struct Dominant<E> {
    value: f64,
    error_bound: f64,
    vector: E,
    report: IterationReport,
}

fn dominant<E: AlgebraElement>(
    t: &E,
    method: EigenMethod,
    policy: &TruncationPolicy,
    stop: &StoppingRule,
    deflate: &[MultiIndex],
) -> Result<Dominant<E>> {
    let shape = t.shape().clone();
    let mut v0 = match method {
        EigenMethod::ExpPower => t.clone(),
        _ => E::unit(&shape),
    };
    for m in deflate {
        let c = v0.entry(m)?;
        if c != 0.0 {
            v0 = v0.sub(&E::basis(&shape, m)?.scale(c))?;
        }
    }
    let n0 = v0.norm();
    if !(n0 > 0.0) {
        return Err(Error::DegenerateIterate("start vector vanishes".into()));
    }
    let v0 = v0.scale(1.0 / n0).truncate_if_needed(policy)?.value;
    let y = match method {
        EigenMethod::ExpPower => Some(t.hadamard(t)?.truncate_if_needed(policy)?.value),
        _ => None,
    };
    let mut map = EigenMap {
        w: t,
        y,
        method,
        policy: *policy,
        last: None,
        cache: None,
    };
    let (v, mut report) = truncated_fixed_point(&mut map, v0, policy, stop)?;
    // Rayleigh quotient and bound at the returned iterate.
    let kb = kb_bound(t, &v)?;
    report.extras.insert("rho1".into(), kb.rho1);
    report.extras.insert("eps_lambda".into(), kb.eps_lambda);
    Ok(Dominant {
        value: kb.rho1,
        error_bound: kb.eps_lambda,
        vector: v,
        report,
    })
}

/// Largest or smallest entry of `w` and its position.
///
/// The minimum is the maximum of `-w`. When the dominant eigenvalue turns
/// out negative (the largest-modulus entry is not the maximum), the
/// iteration is repeated on `w - rho 1`, which moves the maximum to the top
/// of the spectrum. Indices in `deflate` are excluded through the start
/// vector.
pub fn find_extreme<E: AlgebraElement>(
    w: &E,
    which: Which,
    method: EigenMethod,
    policy: &TruncationPolicy,
    stop: &StoppingRule,
    deflate: &[MultiIndex],
) -> Result<ExtremeResult<E>> {
    if w.norm() == 0.0 {
        return Err(Error::DegenerateIterate("the zero tensor has no extreme entry".into()));
    }
    let sign = match which {
        Which::Max => 1.0,
        Which::Min => -1.0,
    };
    let target = w.scale(sign);
    let mut shift = 0.0;
    let mut shifted = target.clone();
    let mut iterations = 0;
    let mut dom = dominant(&shifted, method, policy, stop, deflate)?;
    iterations += dom.report.iterations;
    for _ in 0..2 {
        let beta = if dom.value < 0.0 {
            -dom.value
        } else if dom.error_bound > 0.5 * dom.value.abs() && !dom.report.converged {
            // Entries of opposite sign and similar modulus: lift everything.
            (dom.value * dom.value + dom.error_bound * dom.error_bound).sqrt()
        } else {
            break;
        };
        shift += beta;
        shifted = target.shift(shift)?;
        dom = dominant(&shifted, method, policy, stop, deflate)?;
        iterations += dom.report.iterations;
    }
    dom.report.extras.insert("shift".into(), shift);
    dom.report.extras.insert("total_iterations".into(), iterations as f64);

    let value = sign * (dom.value - shift);
    let index = dom.vector.locate_peak()?;
    let entry_value = w.entry(&index)?;
    let validated = (entry_value - value).abs() <= dom.error_bound + 1e-8 * value.abs().max(f64::MIN_POSITIVE);
    Ok(ExtremeResult {
        value,
        entry_value,
        index,
        error_bound: dom.error_bound,
        converged: dom.report.converged,
        report: dom.report,
        eigenvector: dom.vector,
        validated,
        exact_hit: false,
    })
}

/// Entry of `w` closest to `rho`: the largest-modulus entry of
/// `(w - rho 1)^(.-1)`.
///
/// When the inverse cannot be formed because some entry equals `rho`, the
/// position is found instead as the maximum of `c 1 - (w - rho 1)^(.2)`,
/// and the result is flagged as an exact hit. If the inverse is of doubtful
/// quality both searches run and the better read-back wins.
pub fn closest_to<E: AlgebraElement>(
    w: &E,
    rho: f64,
    policy: &TruncationPolicy,
    stop: &StoppingRule,
) -> Result<ExtremeResult<E>> {
    let s = w.shift(-rho)?.truncate_if_needed(policy)?.value;
    let inv_stop = StoppingRule::residual(stop.eta.max(1e-13), stop.max_iters.max(100));
    let mut candidates: Vec<(ExtremeResult<E>, bool)> = Vec::new();
    let mut doubtful = true;
    match hadamard_inverse(&s, policy, &inv_stop) {
        Ok((y, rep)) => {
            let residual = rep.extra("residual").unwrap_or(f64::INFINITY);
            let absolute = residual * E::unit(w.shape()).norm();
            doubtful = !(absolute < 0.5);
            let dom = dominant(&y, EigenMethod::ExpPower, policy, stop, &[])?;
            let index = dom.vector.locate_peak()?;
            let entry_value = w.entry(&index)?;
            let value = rho + 1.0 / dom.value;
            let error_bound = dom.error_bound / (dom.value * dom.value);
            candidates.push((
                ExtremeResult {
                    value,
                    entry_value,
                    index,
                    error_bound,
                    converged: dom.report.converged,
                    report: dom.report,
                    eigenvector: dom.vector,
                    validated: (entry_value - value).abs() <= error_bound + 1e-8 * value.abs(),
                    exact_hit: false,
                },
                false,
            ));
        }
        Err(Error::Divergence { .. }) => {}
        Err(e) => return Err(e),
    }
    if doubtful {
        let est = 1.5 * sup_norm_estimate(&s, policy)?;
        let sq = s.hadamard(&s)?.truncate_if_needed(policy)?.value;
        let t = sq.scale(-1.0).shift(est * est)?;
        let dom = dominant(&t, EigenMethod::ExpPower, policy, stop, &[])?;
        let index = dom.vector.locate_peak()?;
        let entry_value = w.entry(&index)?;
        let exact = entry_value == rho;
        candidates.push((
            ExtremeResult {
                value: entry_value,
                entry_value,
                index,
                error_bound: dom.error_bound,
                converged: dom.report.converged,
                report: dom.report,
                eigenvector: dom.vector,
                validated: true,
                exact_hit: exact,
            },
            true,
        ));
    }
    let best = candidates
        .into_iter()
        .min_by(|a, b| {
            let da = (a.0.entry_value - rho).abs();
            let db = (b.0.entry_value - rho).abs();
            da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal)
        })
        .expect("at least one search runs");
    let mut result = best.0;
    if best.1 && !result.exact_hit {
        // The inverse failed, so some entry is numerically equal to rho.
        result.exact_hit = (result.entry_value - rho).abs() <= 1e-12 * rho.abs().max(1.0);
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cp::CpTensor;
    use crate::shape::Shape;
    use approx::assert_relative_eq;

    fn d1(values: &[f64]) -> DenseTensor {
        DenseTensor::from_vec(Shape::new(vec![values.len()]).unwrap(), values.to_vec()).unwrap()
    }

    fn exact() -> TruncationPolicy {
        TruncationPolicy::exact()
    }

    #[test]
    fn power_step_on_unit_is_stationary() {
        let u = d1(&[1.0; 4]);
        let v = d1(&[0.5; 4]);
        let (next, gamma) = power_step(&u, &v).unwrap();
        assert_eq!(next, v);
        assert_eq!(gamma, 1.0);
    }

    #[test]
    fn rq_step_hand_example() {
        let w = d1(&[1.0, 3.0]);
        let v = d1(&[1.0, 1.0]).scale(1.0 / 2f64.sqrt());
        let step = power_rq_step(&w, &v).unwrap();
        assert_relative_eq!(step.rho1, 2.0, max_relative = 1e-15);
        assert_relative_eq!(step.rho2, 5.0, max_relative = 1e-15);
        assert_relative_eq!(step.eps_lambda, 1.0, max_relative = 1e-14);
        let kb = kb_bound(&w, &v).unwrap();
        assert!(kb.holds_for(&w));
    }

    #[test]
    fn kb_is_tight_at_eigenvectors() {
        let w = d1(&[1.0, 3.0, -2.0]);
        let e = d1(&[0.0, 1.0, 0.0]);
        let kb = kb_bound(&w, &e).unwrap();
        assert_eq!(kb, KbBound { rho1: 3.0, eps_lambda: 0.0 });
        let step = power_rq_step(&d1(&[1.0; 3]), &d1(&[0.6, 0.0, 0.8])).unwrap();
        assert_relative_eq!(step.rho1, 1.0, max_relative = 1e-15);
        assert_eq!(step.eps_lambda, 0.0);
    }

    #[test]
    fn exp_power_recurrence() {
        let w = d1(&[1.0, 3.0, -2.0]);
        let y = w.hadamard(&w).unwrap();
        let v0 = w.scale(1.0 / w.norm());
        let s1 = exp_power_step(&w, &y, &v0).unwrap();
        let expect = [1.0, 9.0, 4.0].map(|x| x / 98f64.sqrt());
        for (a, b) in s1.next.values().iter().zip(expect) {
            assert_relative_eq!(*a, b, max_relative = 1e-14);
        }
        let stop = StoppingRule::residual(1e-10, 50);
        let r = find_extreme(&w, Which::Max, EigenMethod::ExpPower, &exact(), &stop, &[]).unwrap();
        assert!(r.report.iterations <= 6, "{}", r.report.iterations);
        let e2 = d1(&[0.0, 1.0, 0.0]);
        assert!(r.eigenvector.distance(&e2).unwrap() <= 1e-10);
        assert_eq!(r.index, MultiIndex(vec![1]));
        assert_relative_eq!(r.value, 3.0, max_relative = 1e-12);
    }

    #[test]
    fn max_and_min_small_vector() {
        let w = d1(&[1.0, 3.0, -2.0]);
        let stop = StoppingRule::relative_step(1e-12, 500);
        for method in [EigenMethod::Power, EigenMethod::PowerRq, EigenMethod::ExpPower] {
            let r = find_extreme(&w, Which::Max, method, &exact(), &stop, &[]).unwrap();
            assert_eq!(r.index, MultiIndex(vec![1]), "{method:?}");
            assert_eq!(r.entry_value, 3.0);
            assert!(r.validated);
            let r = find_extreme(&w, Which::Min, method, &exact(), &stop, &[]).unwrap();
            assert_eq!(r.index, MultiIndex(vec![2]), "{method:?}");
            assert_eq!(r.entry_value, -2.0);
            assert_relative_eq!(r.value, -2.0, max_relative = 1e-8);
        }
    }

    #[test]
    fn max_needs_shift_when_negative_dominates() {
        let w = d1(&[-5.0, 1.0, 2.0, -4.0]);
        let stop = StoppingRule::relative_step(1e-12, 200);
        let r = find_extreme(&w, Which::Max, EigenMethod::ExpPower, &exact(), &stop, &[]).unwrap();
        assert_eq!(r.index, MultiIndex(vec![2]));
        assert_relative_eq!(r.value, 2.0, max_relative = 1e-8);
        assert!(r.report.extra("shift").unwrap() > 0.0);
    }

    #[test]
    fn deflation_finds_runner_up() {
        let w = d1(&[1.0, 3.0, -2.0, 2.5]);
        let stop = StoppingRule::relative_step(1e-12, 200);
        let r = find_extreme(&w, Which::Max, EigenMethod::ExpPower, &exact(), &stop, &[MultiIndex(vec![1])]).unwrap();
        assert_eq!(r.index, MultiIndex(vec![3]));
        let r = find_extreme(&w, Which::Max, EigenMethod::Power, &exact(), &stop, &[MultiIndex(vec![1])]).unwrap();
        assert_eq!(r.index, MultiIndex(vec![3]));
    }

    #[test]
    fn max_on_cp_input() {
        let shape = Shape::new(vec![4, 5, 3]).unwrap();
        let w = CpTensor::from_terms(
            shape,
            &[
                vec![vec![1.0, 2.0, 0.5, 1.0], vec![1.0, 0.2, 3.0, 1.0, 0.1], vec![1.0, 2.0, 1.5]],
                vec![vec![0.1, 0.0, 0.3, 0.2], vec![1.0, 1.0, 1.0, 1.0, 1.0], vec![0.5, 0.5, 0.5]],
            ],
        )
        .unwrap();
        let dense = w.to_dense().unwrap();
        let (m, v) = dense.argmax();
        let policy = TruncationPolicy::for_input_rank(1e-10, 2).unwrap();
        let stop = StoppingRule::relative_step(1e-7, 60);
        let r = find_extreme(&w, Which::Max, EigenMethod::ExpPower, &policy, &stop, &[]).unwrap();
        assert_eq!(r.index, m);
        assert_eq!(r.entry_value, v);
    }

    #[test]
    fn closest_examples() {
        let w = d1(&[1.0, 2.0, 3.0]);
        let stop = StoppingRule::relative_step(1e-12, 100);
        let r = closest_to(&w, 2.2, &exact(), &stop).unwrap();
        assert_eq!(r.index, MultiIndex(vec![1]));
        assert_eq!(r.entry_value, 2.0);
        let r = closest_to(&w, -7.0, &exact(), &stop).unwrap();
        assert_eq!(r.index, MultiIndex(vec![0]));
        let w = d1(&[-3.0, 0.5, 2.0, -0.25, 4.0]);
        let r = closest_to(&w, 0.0, &exact(), &stop).unwrap();
        assert_eq!(r.index, MultiIndex(vec![3]));
    }

    #[test]
    fn closest_exact_hit() {
        let w = d1(&[1.0, 2.0, 3.0]);
        let stop = StoppingRule::relative_step(1e-12, 100);
        let r = closest_to(&w, 2.0, &exact(), &stop).unwrap();
        assert_eq!(r.index, MultiIndex(vec![1]));
        assert!(r.exact_hit);
    }
}
