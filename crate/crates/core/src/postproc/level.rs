//! Characteristic functions, level sets and the statistics built on them.

use num_bigint::BigUint;
use num_traits::{FromPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::functions::{hadamard_sign, SignMethod};
use crate::algebra::{uniform_mean, AlgebraElement, TruncationPolicy};
use crate::error::{Error, Result};
use crate::iteration::{IterationReport, StoppingRule};

/// Open interval `]lower, upper[`; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() || lower >= upper {
            return Err(Error::InvalidParameter(format!("empty interval ]{lower}, {upper}[")));
        }
        Ok(Self { lower, upper })
    }

    /// `]-inf, upper[`.
    pub fn below(upper: f64) -> Result<Self> {
        Self::new(f64::NEG_INFINITY, upper)
    }

    /// `]lower, +inf[`.
    pub fn above(lower: f64) -> Result<Self> {
        Self::new(lower, f64::INFINITY)
    }

    pub fn full() -> Self {
        Self {
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower < x && x < self.upper
    }
}

/// `sign(omega 1 - w)`.
fn shifted_sign<E: AlgebraElement>(
    w: &E,
    omega: f64,
    policy: &TruncationPolicy,
    stop: &StoppingRule,
    method: SignMethod,
) -> Result<(E, IterationReport)> {
    let shifted = w.scale(-1.0).shift(omega)?;
    hadamard_sign(&shifted, policy, stop, method)
}

/// Characteristic function `chi_S(w)`: one inside `S`, zero outside, and
/// one half for entries sitting exactly on a finite end point.
///
/// Returns one sign-iteration report per finite end point.
pub fn characteristic<E: AlgebraElement>(
    w: &E,
    s: &Interval,
    policy: &TruncationPolicy,
    stop: &StoppingRule,
) -> Result<(E, Vec<IterationReport>)> {
    characteristic_with(w, s, policy, stop, SignMethod::default())
}

pub fn characteristic_with<E: AlgebraElement>(
    w: &E,
    s: &Interval,
    policy: &TruncationPolicy,
    stop: &StoppingRule,
    method: SignMethod,
) -> Result<(E, Vec<IterationReport>)> {
    let unit = E::unit(w.shape());
    let (chi, reports) = match (s.lower.is_finite(), s.upper.is_finite()) {
        (false, false) => (unit, Vec::new()),
        (false, true) => {
            let (sg, r) = shifted_sign(w, s.upper, policy, stop, method)?;
            (unit.add(&sg)?.scale(0.5), vec![r])
        }
        (true, false) => {
            let (sg, r) = shifted_sign(w, s.lower, policy, stop, method)?;
            (unit.sub(&sg)?.scale(0.5), vec![r])
        }
        (true, true) => {
            let (hi, r2) = shifted_sign(w, s.upper, policy, stop, method)?;
            let (lo, r1) = shifted_sign(w, s.lower, policy, stop, method)?;
            (hi.sub(&lo)?.scale(0.5), vec![r1, r2])
        }
    };
    Ok((chi.truncate_if_needed(policy)?.value, reports))
}

/// Level set function `L_S(w) = chi_S(w) (.) w`.
pub fn level_set<E: AlgebraElement>(
    w: &E,
    s: &Interval,
    policy: &TruncationPolicy,
    stop: &StoppingRule,
) -> Result<(E, Vec<IterationReport>)> {
    let (chi, reports) = characteristic(w, s, policy, stop)?;
    let l = chi.hadamard(w)?.truncate_if_needed(policy)?.value;
    Ok((l, reports))
}

/// `<chi, 1>` as computed and rounded to the nearest integer.
#[derive(Debug, Clone, PartialEq)]
pub struct Cardinality {
    pub raw: f64,
    /// Halves round down, so a lone boundary entry (`chi = 1/2`) is not
    /// counted.
    pub rounded: BigUint,
}

pub fn support_cardinality<E: AlgebraElement>(chi: &E) -> Result<Cardinality> {
    let raw = crate::algebra::state_functional(chi)?;
    if !raw.is_finite() {
        return Err(Error::NumericalFailure(format!("characteristic mass {raw}")));
    }
    let r = (raw - 0.5).ceil();
    let rounded = if r <= 0.0 {
        BigUint::zero()
    } else {
        BigUint::from_f64(r).unwrap_or_default()
    };
    Ok(Cardinality { raw, rounded })
}

/// `P_w(S) = <chi_S(w), 1> / N`, clamped to `[0, 1]`.
pub fn probability<E: AlgebraElement>(
    w: &E,
    s: &Interval,
    policy: &TruncationPolicy,
    stop: &StoppingRule,
) -> Result<f64> {
    let (chi, _) = characteristic(w, s, policy, stop)?;
    probability_of(&chi)
}

/// Probability from an already computed characteristic function.
pub fn probability_of<E: AlgebraElement>(chi: &E) -> Result<f64> {
    Ok(uniform_mean(chi)?.clamp(0.0, 1.0))
}

/// Mean `<w, 1> / N` and variance `|w - mean 1|^2 / N`.
///
/// The centred tensor has rank one higher than `w` and is not truncated.
/// Its norm is taken after multiplying by the rank-one tensor `N^(-1/2)`,
/// which keeps the result finite for astronomically large `N`.
pub fn mean_variance<E: AlgebraElement>(w: &E) -> Result<(f64, f64)> {
    let mean = uniform_mean(w)?;
    let centred = w.shift(-mean)?;
    let weighted = centred.hadamard(&E::normalized_unit(w.shape()))?;
    let sd = weighted.norm();
    Ok((mean, sd * sd))
}

/// `<L_S(w), 1> / <chi_S(w), 1>`, the mean over entries lying in `S`.
pub fn conditional_mean<E: AlgebraElement>(
    w: &E,
    s: &Interval,
    policy: &TruncationPolicy,
    stop: &StoppingRule,
) -> Result<f64> {
    let (chi, _) = characteristic(w, s, policy, stop)?;
    conditional_mean_of(w, &chi)
}

/// Conditional mean from an already computed characteristic function.
pub fn conditional_mean_of<E: AlgebraElement>(w: &E, chi: &E) -> Result<f64> {
    // <chi (.) w, 1> = <chi, w>; both sums are taken against 1/N weights.
    let weights = E::uniform_weights(w.shape());
    let mass = chi.inner(&weights)?;
    let count = mass * w.shape().total_size_f64();
    if !(count > 0.5) {
        return Err(Error::EmptyLevelSet(count));
    }
    let total = chi.inner(&w.hadamard(&weights)?)?;
    Ok(total / mass)
}
