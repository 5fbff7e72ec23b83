//! Hadamard functions computed by truncated Newton-type iterations:
//! inverse, sign and square root.

use serde::{Deserialize, Serialize};

use crate::algebra::{AlgebraElement, TruncationPolicy};
use crate::error::{Error, Result};
use crate::iteration::{truncated_fixed_point, IterationMap, IterationReport, StoppingRule};

/// Iteration used for the Hadamard sign.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignMethod {
    /// `v <- v (.) (3 - v^2) / 2`, inversion free.
    #[default]
    NewtonSchulz,
    /// `v <- (v + v^-1) / 2`, each step solving an inner inverse.
    RobertsNewton,
}

/// Residual level above which a finished inverse iteration is treated as
/// failed rather than merely slow.
const INVERSE_FAILURE_RESIDUAL: f64 = 0.5;

/// Steps of the exponentiated power run behind [`sup_norm_estimate`].
const SUP_ESTIMATE_STEPS: usize = 12;

/// Estimate `s` of `|w|_inf` with `|w|_inf / s` in roughly `[0.9, 1.4]`.
///
/// Exact for dense data. Otherwise `v_k ~ w^(2^k)` is iterated while two
/// bounds are tracked: `<w (.) w, v_k (.) v_k>^(1/2) <= |w|_inf <= |w^(2^k)|^(2^-k)`.
/// The result is `1.1 max(lower, upper / 1.5)`.
pub fn sup_norm_estimate<E: AlgebraElement>(w: &E, policy: &TruncationPolicy) -> Result<f64> {
    if let Some(s) = w.sup_norm_hint() {
        return Ok(s);
    }
    let norm = w.norm();
    if norm == 0.0 {
        return Ok(0.0);
    }
    if !norm.is_finite() {
        return Err(Error::NumericalFailure("input norm is not finite".into()));
    }
    let mut v = w.scale(1.0 / norm);
    let mut log_norm = norm.ln();
    // Mixed signs make <w, u> cancel; w (.) w is non-negative.
    let w2 = w.hadamard(w)?;
    let mut lower = 0.0f64;
    let mut upper = norm;
    for k in 0..SUP_ESTIMATE_STEPS {
        let u = v.hadamard(&v)?.truncate_if_needed(policy)?.value;
        let un = u.norm();
        if un == 0.0 || !un.is_finite() {
            break;
        }
        // v has unit norm, so u = v (.) v is a probability vector and
        // <w (.) w, u> is a weighted mean of the squared entries.
        lower = lower.max(w2.inner(&u)?.abs().sqrt());
        log_norm = un.ln() + 2.0 * log_norm;
        upper = upper.min((log_norm / 2f64.powi(k as i32 + 1)).exp());
        v = u.scale(1.0 / un);
        if lower >= upper / 1.5 {
            break;
        }
    }
    Ok(1.1 * lower.max(upper / 1.5))
}

struct InverseMap<'a, E> {
    w: &'a E,
    two: E,
    unit: E,
    unit_norm: f64,
    policy: TruncationPolicy,
}

impl<E: AlgebraElement> IterationMap<E> for InverseMap<'_, E> {
    fn apply(&mut self, v: &E) -> Result<E> {
        let wv = self.w.hadamard(v)?.truncate_if_needed(&self.policy)?.value;
        let s = self.two.sub(&wv)?;
        v.hadamard(&s)
    }

    fn residual(&mut self, v: &E) -> Option<Result<f64>> {
        Some(
            self.w
                .hadamard(v)
                .and_then(|wv| self.unit.distance(&wv))
                .map(|r| r / self.unit_norm),
        )
    }
}

/// Newton iteration for `w^(.-1)` from an explicit start.
pub(crate) fn inverse_from<E: AlgebraElement>(
    w: &E,
    v0: E,
    policy: &TruncationPolicy,
    stop: &StoppingRule,
) -> Result<(E, IterationReport)> {
    let unit = E::unit(w.shape());
    let mut map = InverseMap {
        w,
        two: unit.scale(2.0),
        unit_norm: unit.norm(),
        unit,
        policy: *policy,
    };
    let (v, mut report) = truncated_fixed_point(&mut map, v0, policy, stop)?;
    let residual = match map.residual(&v) {
        Some(r) => r?,
        None => unreachable!("inverse map defines a residual"),
    };
    report.extras.insert("residual".into(), residual);
    if !residual.is_finite() || (!report.converged && residual >= INVERSE_FAILURE_RESIDUAL) {
        return Err(Error::Divergence {
            report: Box::new(report),
        });
    }
    Ok((v, report))
}

/// Hadamard inverse `w^(.-1)` by Newton's method
/// `v <- v (.) (2 1 - w (.) v)`, started from `w / s^2` with `s` the
/// [`sup_norm_estimate`] so that every `w_m v_m` starts in `(0, 2)`.
///
/// The residual reported per step is `|1 - w (.) v| / |1|`. Zero entries of
/// `w` leave the residual stuck at or above one half, which is reported
/// as [`Error::Divergence`].
pub fn hadamard_inverse<E: AlgebraElement>(
    w: &E,
    policy: &TruncationPolicy,
    stop: &StoppingRule,
) -> Result<(E, IterationReport)> {
    let s = sup_norm_estimate(w, policy)?;
    if s == 0.0 {
        return Err(Error::Divergence {
            report: Box::default(),
        });
    }
    inverse_from(w, w.scale(1.0 / (s * s)), policy, stop)
}

struct NewtonSchulzMap<E> {
    unit: E,
    three: E,
    scaled_norm: f64,
    policy: TruncationPolicy,
    /// `T(z (.) z)` computed for the residual of `z`, reused by the next step.
    square: Option<(E, E)>,
}

impl<E: AlgebraElement> NewtonSchulzMap<E> {
    fn square_of(&mut self, v: &E) -> Result<E> {
        if let Some((key, sq)) = self.square.take() {
            if &key == v {
                return Ok(sq);
            }
        }
        Ok(v.hadamard(v)?.truncate_if_needed(&self.policy)?.value)
    }
}

impl<E: AlgebraElement> IterationMap<E> for NewtonSchulzMap<E> {
    fn apply(&mut self, v: &E) -> Result<E> {
        let sq = self.square_of(v)?;
        let t = self.three.sub(&sq)?;
        Ok(v.hadamard(&t)?.scale(0.5))
    }

    fn residual(&mut self, v: &E) -> Option<Result<f64>> {
        let r = (|| {
            let sq = self.square_of(v)?;
            let r = self.unit.distance(&sq)? / self.scaled_norm;
            self.square = Some((v.clone(), sq));
            Ok(r)
        })();
        Some(r)
    }
}

struct RobertsNewtonMap<E> {
    unit: E,
    scaled_norm: f64,
    policy: TruncationPolicy,
    inner_stop: StoppingRule,
    inverse: Option<E>,
}

impl<E: AlgebraElement> IterationMap<E> for RobertsNewtonMap<E> {
    fn apply(&mut self, v: &E) -> Result<E> {
        // The previous inverse is an excellent start for the next one.
        let warm = self.inverse.take().filter(|inv| {
            v.hadamard(inv)
                .and_then(|p| p.distance(&self.unit))
                .map(|d| d < 0.5 * self.unit.norm())
                .unwrap_or(false)
        });
        let inv = match warm {
            Some(v0) => inverse_from(v, v0, &self.policy, &self.inner_stop)?.0,
            None => hadamard_inverse(v, &self.policy, &self.inner_stop)?.0,
        };
        let next = v.add(&inv)?.scale(0.5);
        self.inverse = Some(inv);
        Ok(next)
    }

    fn residual(&mut self, v: &E) -> Option<Result<f64>> {
        Some(
            v.hadamard(v)
                .and_then(|sq| self.unit.distance(&sq))
                .map(|r| r / self.scaled_norm),
        )
    }
}

/// Hadamard sign of `w`, iterating on `w / s` with `s = 1.1` times the
/// [`sup_norm_estimate`]. Scaling never changes the sign pattern, and keeps
/// every entry inside the Newton-Schulz basin `|x| < sqrt(3)`.
///
/// Per-step residuals are `|1 - v (.) v| / |w / s|`; the final report also
/// carries `fixed_point_residual = |v - v^3| / |w / s|`, which vanishes on
/// zero entries too, and the applied `scale`.
pub fn hadamard_sign<E: AlgebraElement>(
    w: &E,
    policy: &TruncationPolicy,
    stop: &StoppingRule,
    method: SignMethod,
) -> Result<(E, IterationReport)> {
    let est = sup_norm_estimate(w, policy)?;
    if est == 0.0 {
        let mut report = IterationReport {
            converged: true,
            ..IterationReport::default()
        };
        report.extras.insert("scale".into(), 0.0);
        return Ok((w.clone(), report));
    }
    let scale = 1.1 * est;
    let x = w.scale(1.0 / scale);
    let unit = E::unit(w.shape());
    let scaled_norm = x.norm();
    let (v, mut report) = match method {
        SignMethod::NewtonSchulz => {
            let mut map = NewtonSchulzMap {
                three: unit.scale(3.0),
                unit,
                scaled_norm,
                policy: *policy,
                square: None,
            };
            truncated_fixed_point(&mut map, x, policy, stop)?
        }
        SignMethod::RobertsNewton => {
            let mut map = RobertsNewtonMap {
                unit,
                scaled_norm,
                policy: *policy,
                inner_stop: StoppingRule::residual(1e-13_f64.max(policy.epsilon), 200),
                inverse: None,
            };
            truncated_fixed_point(&mut map, x, policy, stop)?
        }
    };
    let cube = v.hadamard(&v)?.truncate_if_needed(policy)?.value.hadamard(&v)?;
    report
        .extras
        .insert("fixed_point_residual".into(), v.distance(&cube)? / scaled_norm);
    report.extras.insert("scale".into(), scale);
    Ok((v, report))
}

/// Entrywise square root by the Babylonian iteration
/// `v <- (v + v^(.-1) (.) w) / 2`, started from `sqrt(s) 1`.
pub fn hadamard_sqrt<E: AlgebraElement>(
    w: &E,
    policy: &TruncationPolicy,
    stop: &StoppingRule,
) -> Result<(E, IterationReport)> {
    let s = sup_norm_estimate(w, policy)?;
    let unit = E::unit(w.shape());
    if s == 0.0 {
        return Ok((w.clone(), IterationReport { converged: true, ..Default::default() }));
    }
    let inner_stop = StoppingRule::residual(1e-13_f64.max(policy.epsilon), 200);
    let mut inverse: Option<E> = None;
    let w_norm = w.norm();
    let mut map = |v: &E| -> Result<E> {
        let warm = inverse.take().filter(|inv| {
            v.hadamard(inv)
                .and_then(|p| p.distance(&unit))
                .map(|d| d < 0.5 * unit.norm())
                .unwrap_or(false)
        });
        let inv = match warm {
            Some(v0) => inverse_from(v, v0, policy, &inner_stop)?.0,
            None => hadamard_inverse(v, policy, &inner_stop)?.0,
        };
        let q = inv.hadamard(w)?.truncate_if_needed(policy)?.value;
        let next = v.add(&q)?.scale(0.5);
        inverse = Some(inv);
        Ok(next)
    };
    let v0 = E::unit(w.shape()).scale(s.sqrt());
    let (v, mut report) = truncated_fixed_point(&mut map, v0, policy, stop)?;
    let sq = v.hadamard(&v)?;
    report.extras.insert("residual".into(), sq.distance(w)? / w_norm);
    Ok((v, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::DenseTensor;
    use crate::shape::Shape;
    use crate::tt::TtTensor;
    use approx::assert_relative_eq;

    fn d1(values: &[f64]) -> DenseTensor {
        DenseTensor::from_vec(Shape::new(vec![values.len()]).unwrap(), values.to_vec()).unwrap()
    }

    #[test]
    fn inverse_of_unit_is_immediate() {
        let u = d1(&[1.0, 1.0, 1.0]);
        let stop = StoppingRule::residual(1e-14, 10);
        let (v, rep) = hadamard_inverse(&u, &TruncationPolicy::exact(), &stop).unwrap();
        assert_eq!(v, u);
        assert_eq!(rep.iterations, 1);
        assert_eq!(rep.step_history[0].residual, Some(0.0));
    }

    #[test]
    fn inverse_first_step_and_limit() {
        let w = d1(&[1.0, 2.0]);
        let one = StoppingRule::residual(1e-300, 1);
        let (v1, _) = hadamard_inverse(&w, &TruncationPolicy::exact(), &one).unwrap();
        assert_eq!(v1.values(), &[0.4375, 0.5]);
        let stop = StoppingRule::residual(1e-15, 50);
        let (v, rep) = hadamard_inverse(&w, &TruncationPolicy::exact(), &stop).unwrap();
        assert!(rep.converged);
        assert_relative_eq!(v.values()[0], 1.0, max_relative = 1e-14);
        assert_relative_eq!(v.values()[1], 0.5, max_relative = 1e-14);
    }

    #[test]
    fn inverse_with_zero_entry_diverges() {
        let w = d1(&[1.0, 0.0, 2.0]);
        let err = hadamard_inverse(&w, &TruncationPolicy::exact(), &StoppingRule::residual(1e-12, 60));
        match err {
            Err(Error::Divergence { report }) => assert_eq!(report.iterations, 60),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn sign_mixed_entries() {
        let w = d1(&[-2.0, 0.1, 3.0, 0.0]);
        for method in [SignMethod::NewtonSchulz, SignMethod::RobertsNewton] {
            let w = if method == SignMethod::RobertsNewton { d1(&[-2.0, 0.1, 3.0]) } else { w.clone() };
            let (v, rep) = hadamard_sign(&w, &TruncationPolicy::exact(), &StoppingRule::relative_step(1e-12, 100), method)
                .unwrap();
            assert!(rep.converged, "{method:?}");
            for (x, y) in v.values().iter().zip(w.sign().values()) {
                assert!((x - y).abs() <= 1e-6, "{method:?}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn sign_of_positive_tensor_is_unit() {
        let shape = Shape::uniform(3, 4).unwrap();
        let w = TtTensor::rank_one(&shape, &vec![vec![0.5, 1.0, 2.0]; 4]).unwrap();
        let policy = TruncationPolicy::for_input_rank(1e-10, 1).unwrap();
        let (v, _) = hadamard_sign(&w, &policy, &StoppingRule::relative_step(1e-9, 100), SignMethod::NewtonSchulz).unwrap();
        let u = TtTensor::unit(&shape);
        assert!(v.distance(&u).unwrap() <= 1e-6 * u.norm());
    }

    #[test]
    fn sqrt_examples() {
        let w = d1(&[4.0, 9.0]);
        let (v, rep) = hadamard_sqrt(&w, &TruncationPolicy::exact(), &StoppingRule::relative_step(1e-14, 60)).unwrap();
        assert!(rep.converged);
        assert_relative_eq!(v.values()[0], 2.0, max_relative = 1e-13);
        assert_relative_eq!(v.values()[1], 3.0, max_relative = 1e-13);
        let u = d1(&[1.0, 1.0]);
        let (v, _) = hadamard_sqrt(&u, &TruncationPolicy::exact(), &StoppingRule::relative_step(1e-14, 60)).unwrap();
        assert_eq!(v, u);
    }

    #[test]
    fn estimate_brackets_sup_norm() {
        let shape = Shape::new(vec![4, 5, 3]).unwrap();
        let dense = DenseTensor::from_function(shape, |m| {
            (m.0[0] as f64 - 1.5) * (0.3 + m.0[1] as f64) + m.0[2] as f64
        })
        .unwrap();
        let tt = TtTensor::from_dense(&dense, 0.0).unwrap();
        let est = sup_norm_estimate(&tt, &TruncationPolicy::for_input_rank(1e-12, tt.rank()).unwrap()).unwrap();
        let sup = dense.sup_norm();
        assert!(est >= sup / 1.5 && est <= 1.1 * 1.5 * sup, "{est} vs {sup}");
    }
}
