//! TT rounding: right-to-left orthogonalisation followed by a
//! left-to-right sweep of truncated SVDs.
//!
//! With every core but the current one orthonormal, discarding singular
//! values of the current unfolding changes the whole tensor by exactly the
//! discarded tail. Splitting the budget `epsilon |w|` evenly over the
//! `d - 1` bonds as `delta = epsilon |w| / sqrt(d - 1)` gives
//! `|w - w*| <= epsilon |w|`.

use nalgebra::{DMatrix, DVector};

use super::{ldexp, TtCore, TtTensor};
use crate::algebra::{AlgebraElement, Truncated, TruncationPolicy};
use crate::error::{Error, Result};
use crate::linalg::{svd_sorted, tail_norms};

pub fn tt_round(w: &TtTensor, policy: &TruncationPolicy) -> Result<Truncated<TtTensor>> {
    policy.validate()?;
    let d = w.order();
    if d == 1 {
        return Ok(Truncated::exact(w.clone()));
    }
    let ortho = w.right_orthogonalize();
    let mut cores = ortho.cores;
    // The first core now carries the whole norm, which may be far below
    // the range where sums of squares are safe; work on it scaled by an
    // exact power of two.
    let peak = cores[0].data.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if peak == 0.0 {
        return Ok(Truncated::exact(TtTensor::zero(w.shape())));
    }
    if !peak.is_finite() {
        return Err(Error::NumericalFailure("TT rounding met a non-finite core".into()));
    }
    let exponent = peak.log2().floor() as i32;
    cores[0].data.iter_mut().for_each(|x| *x = ldexp(*x, -exponent));
    let total = DVector::from_column_slice(&cores[0].data).norm();
    let delta = policy.epsilon * total / ((d - 1) as f64).sqrt();
    let cap = policy.max_rank.unwrap_or(usize::MAX);
    let mut discarded_sq = 0.0;
    let mut miss = false;

    for k in 0..d - 1 {
        let n = cores[k].n;
        let svd = svd_sorted(cores[k].left_unfold())?;
        let tails = tail_norms(&svd.s);
        let mut r = (1..=svd.s.len()).find(|&j| tails[j] <= delta).unwrap_or(svd.s.len());
        if r > cap {
            r = cap;
            miss = true;
        }
        discarded_sq += tails[r] * tails[r];
        cores[k] = TtCore::from_left_unfold(&svd.u.columns(0, r).into_owned(), n);
        let sv = DMatrix::from_diagonal(&DVector::from_column_slice(&svd.s[..r])) * svd.vt.rows(0, r);
        let next_n = cores[k + 1].n;
        let m = sv * cores[k + 1].right_unfold();
        cores[k + 1] = TtCore::from_right_unfold(&m, next_n);
    }
    // Hand the exponent back in small pieces so no core leaves the normal range.
    let (q, spare) = (exponent.div_euclid(d as i32), exponent.rem_euclid(d as i32));
    for (k, core) in cores.iter_mut().enumerate() {
        let shift = q + i32::from((k as i32) < spare);
        core.data.iter_mut().for_each(|x| *x = ldexp(*x, shift));
    }
    let mut value = TtTensor::new(cores)?;
    value.rebalance();
    Ok(Truncated {
        value,
        relative_error: discarded_sq.sqrt() / total,
        tolerance_miss: miss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shape::{MultiIndex, Shape};
    use approx::assert_relative_eq;

    #[test]
    fn redundant_sum_collapses() {
        let shape = Shape::uniform(4, 5).unwrap();
        let e = TtTensor::basis(&shape, &MultiIndex(vec![0, 1, 2, 3, 0])).unwrap();
        let u = TtTensor::unit(&shape);
        let w = e.add(&u).unwrap().add(&e).unwrap();
        assert_eq!(w.rank(), 3);
        let t = tt_round(&w, &TruncationPolicy::new(1e-12, 1).unwrap()).unwrap();
        assert_eq!(t.value.rank(), 2);
        assert!(w.distance(&t.value).unwrap() <= 1e-12 * w.norm());
    }

    #[test]
    fn error_is_controlled() {
        let shape = Shape::new(vec![5, 6, 4, 5]).unwrap();
        let dense = crate::dense::DenseTensor::from_function(shape, |m| {
            (1.0 + m.0.iter().enumerate().map(|(k, &i)| (k + 1) as f64 * i as f64).sum::<f64>()).sqrt()
        })
        .unwrap();
        let w = TtTensor::from_dense(&dense, 0.0).unwrap();
        for eps in [1e-2, 1e-4, 1e-8] {
            let t = tt_round(&w, &TruncationPolicy::new(eps, 1).unwrap()).unwrap();
            let err = w.distance(&t.value).unwrap() / w.norm();
            assert!(err <= eps * (1.0 + 1e-8), "eps {eps}: {err}");
            assert_relative_eq!(err, t.relative_error, max_relative = 1e-6, epsilon = 1e-14);
            assert!(!t.tolerance_miss);
        }
    }

    #[test]
    fn rank_cap_flags_miss() {
        let shape = Shape::new(vec![5, 6, 4, 5]).unwrap();
        let dense = crate::dense::DenseTensor::from_function(shape, |m| {
            ((m.0[0] * m.0[1]) as f64).sin() + (m.0[2] as f64 - m.0[3] as f64).cos()
        })
        .unwrap();
        let w = TtTensor::from_dense(&dense, 0.0).unwrap();
        let policy = TruncationPolicy::new(1e-14, 1).unwrap().with_max_rank(1).unwrap();
        let t = tt_round(&w, &policy).unwrap();
        assert_eq!(t.value.rank(), 1);
        assert!(t.tolerance_miss);
    }
}
