//! Rank reduction for CP tensors by alternating least squares.
//!
//! No quasi-optimal truncation exists for CP, so the target rank is found
//! by search: ranks double until the fit meets the tolerance, then the gap
//! is bisected. Each fit sweeps the modes and solves the normal equations
//! `H X = F A` for one factor block with the others held fixed.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::CpTensor;
use crate::algebra::{check_storage, AlgebraElement, Truncated, TruncationPolicy};
use crate::error::{Error, Result};
use crate::linalg::solve_spd;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlsOptions {
    pub max_sweeps: usize,
    /// Stop once a sweep improves the squared residual by less than this
    /// fraction.
    pub stall_tol: f64,
    pub seed: u64,
}

impl Default for AlsOptions {
    fn default() -> Self {
        Self {
            max_sweeps: 50,
            stall_tol: 1e-12,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AlsFit {
    pub approx: CpTensor,
    /// `|w - x|^2` after initialisation and after every sweep.
    pub residual_history: Vec<f64>,
    pub relative_error: f64,
}

/// Squared distance from the Gram sums, clamped at zero.
fn squared_residual(target_sq: f64, target: &CpTensor, x: &CpTensor) -> f64 {
    let cross = x.gram_sum(target);
    let self_sq = x.gram_sum(x);
    (target_sq - 2.0 * cross + self_sq).max(0.0)
}

/// Fits `target` starting from `init`, keeping the rank of `init`.
pub fn als_fit(target: &CpTensor, init: CpTensor, opts: &AlsOptions) -> Result<AlsFit> {
    target.check_same_shape(&init)?;
    let d = target.order();
    let r = init.rank();
    let big_r = target.rank();
    let target_sq = target.gram_sum(target).max(0.0);
    let target_norm = target_sq.sqrt();
    let mut x = init;
    let mut history = vec![squared_residual(target_sq, target, &x)];
    if r == 0 || big_r == 0 {
        let rel = if target_norm > 0.0 { history[0].sqrt() / target_norm } else { 0.0 };
        return Ok(AlsFit { approx: x, residual_history: history, relative_error: rel });
    }

    let mut self_grams: Vec<Vec<f64>> = (0..d).map(|nu| x.mode_gram(&x, nu)).collect();
    let mut cross_grams: Vec<Vec<f64>> = (0..d).map(|nu| x.mode_gram(target, nu)).collect();

    for _ in 0..opts.max_sweeps {
        for nu in 0..d {
            let mut h = vec![1.0; r * r];
            let mut f = vec![1.0; r * big_r];
            for mu in (0..d).filter(|&mu| mu != nu) {
                h.iter_mut().zip(&self_grams[mu]).for_each(|(a, b)| *a *= b);
                f.iter_mut().zip(&cross_grams[mu]).for_each(|(a, b)| *a *= b);
            }
            let m = target.shape().mode_size(nu);
            let h = DMatrix::from_row_slice(r, r, &h);
            let f = DMatrix::from_row_slice(r, big_r, &f);
            // Rows of A are the target's mode-nu factor vectors.
            let a = DMatrix::from_row_slice(big_r, m, &target.factors[nu]);
            let rhs = f * a;
            let sol = solve_spd(&h, &rhs)?;
            if sol.iter().any(|v| !v.is_finite()) {
                return Err(Error::NumericalFailure("ALS update is not finite".into()));
            }
            let block = &mut x.factors[nu];
            for i in 0..r {
                for k in 0..m {
                    block[i * m + k] = sol[(i, k)];
                }
            }
            self_grams[nu] = x.mode_gram(&x, nu);
            cross_grams[nu] = x.mode_gram(target, nu);
        }
        x = x.balanced();
        for nu in 0..d {
            self_grams[nu] = x.mode_gram(&x, nu);
            cross_grams[nu] = x.mode_gram(target, nu);
        }
        let res = squared_residual(target_sq, target, &x);
        let prev = *history.last().expect("history starts non-empty");
        history.push(res);
        if prev - res <= opts.stall_tol * prev.max(f64::MIN_POSITIVE) || res == 0.0 {
            break;
        }
    }
    let last = *history.last().expect("history starts non-empty");
    let relative_error = if target_norm > 0.0 { last.sqrt() / target_norm } else { 0.0 };
    Ok(AlsFit {
        approx: x,
        residual_history: history,
        relative_error,
    })
}

/// Initial guess of rank `r`: the `r` heaviest terms, topped up with seeded
/// random terms when `target` has fewer.
fn initial_guess(target: &CpTensor, r: usize, seed: u64) -> CpTensor {
    let balanced = target.balanced();
    let norms = balanced.term_norms();
    let mut order: Vec<usize> = (0..balanced.rank()).collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap_or(std::cmp::Ordering::Equal));
    let mut terms: Vec<Vec<Vec<f64>>> = order.iter().take(r).map(|&i| balanced.term(i)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = norms.iter().cloned().fold(0.0f64, f64::max).max(1.0).powf(1.0 / target.order() as f64);
    while terms.len() < r {
        terms.push(
            target
                .shape()
                .mode_sizes()
                .iter()
                .map(|&m| (0..m).map(|_| scale * rng.gen_range(-1.0..1.0) / (m as f64).sqrt()).collect())
                .collect(),
        );
    }
    CpTensor::from_terms(target.shape().clone(), &terms).expect("terms match shape")
}

fn fit_rank(target: &CpTensor, r: usize, opts: &AlsOptions) -> Result<AlsFit> {
    // One r x R cross Gram matrix per mode.
    check_storage(r.checked_mul(target.rank()).and_then(|x| x.checked_mul(target.order())))?;
    match als_fit(target, initial_guess(target, r, opts.seed), opts) {
        Ok(fit) if fit.relative_error.is_finite() => Ok(fit),
        _ => {
            // Heaviest-term starts can be rank deficient; retry from noise.
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ r as u64);
            let terms: Vec<Vec<Vec<f64>>> = (0..r)
                .map(|_| {
                    target
                        .shape()
                        .mode_sizes()
                        .iter()
                        .map(|&m| (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect())
                        .collect()
                })
                .collect();
            let init = CpTensor::from_terms(target.shape().clone(), &terms)?;
            als_fit(target, init, opts)
        }
    }
}

/// Largest accepted `sum_i |term_i| / |x|`. Fits above it are degenerate:
/// large terms cancel, and later Gram sums lose every significant digit.
const MAX_TERM_CONDITION: f64 = 1e4;

fn term_condition(x: &CpTensor) -> f64 {
    let mass: f64 = x.term_norms().iter().sum();
    let norm = x.norm();
    if norm > 0.0 {
        mass / norm
    } else {
        f64::INFINITY
    }
}

fn accepts(fit: &AlsFit, epsilon: f64) -> bool {
    fit.relative_error <= epsilon && term_condition(&fit.approx) <= MAX_TERM_CONDITION
}

/// `T_eps` for CP: the smallest rank whose ALS fit has relative error at
/// most `policy.epsilon`, capped by `policy.max_rank`.
///
/// Without a cap, a tolerance ALS cannot reach keeps the exact merged
/// terms, so iterations that square their iterate should set one.
pub fn truncate_als(w: &CpTensor, policy: &TruncationPolicy) -> Result<Truncated<CpTensor>> {
    policy.validate()?;
    let merged = w.merge_parallel_terms();
    let full = merged.rank();
    let cap = policy.max_rank.unwrap_or(usize::MAX);
    if full <= 1 && full <= cap {
        return Ok(Truncated::exact(merged));
    }
    if policy.epsilon == 0.0 && full <= cap {
        return Ok(Truncated::exact(merged));
    }
    let opts = AlsOptions::default();

    let mut lo = 0usize; // largest rank known to miss the tolerance
    let mut r = 1usize;
    // Fits that met the tolerance but were too degenerate to accept, kept
    // as the fallback when the cap binds.
    let mut degenerate: Option<(f64, AlsFit)> = None;
    let (mut hi, mut hi_fit) = loop {
        if r >= full && full <= cap {
            // The input itself meets any tolerance at its own rank.
            let exact = AlsFit {
                approx: merged.clone(),
                residual_history: vec![0.0],
                relative_error: 0.0,
            };
            break (full, exact);
        }
        let r_eff = r.min(cap);
        let fit = fit_rank(&merged, r_eff, &opts)?;
        if accepts(&fit, policy.epsilon) {
            break (r_eff, fit);
        }
        lo = r_eff;
        if fit.relative_error <= policy.epsilon {
            let c = term_condition(&fit.approx);
            if degenerate.as_ref().map_or(true, |(best, _)| c < *best) {
                degenerate = Some((c, fit.clone()));
            }
        }
        if r_eff == cap {
            let fit = degenerate.map_or(fit, |(_, f)| f);
            return Ok(Truncated {
                value: fit.approx,
                relative_error: fit.relative_error,
                tolerance_miss: true,
            });
        }
        r *= 2;
    };

    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let fit = fit_rank(&merged, mid, &opts)?;
        if accepts(&fit, policy.epsilon) {
            hi = mid;
            hi_fit = fit;
        } else {
            lo = mid;
        }
    }
    Ok(Truncated {
        value: hi_fit.approx,
        relative_error: hi_fit.relative_error,
        tolerance_miss: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shape::Shape;

    fn random_cp(shape: &Shape, r: usize, seed: u64) -> CpTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let terms: Vec<Vec<Vec<f64>>> = (0..r)
            .map(|_| {
                shape
                    .mode_sizes()
                    .iter()
                    .map(|&m| (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect())
                    .collect()
            })
            .collect();
        CpTensor::from_terms(shape.clone(), &terms).unwrap()
    }

    #[test]
    fn cancelling_fits_are_rejected() {
        let shape = Shape::uniform(3, 2).unwrap();
        let big = vec![vec![1e5, 1.0, 0.0], vec![1e5, 0.0, 1.0]];
        let neg = vec![vec![-1e5, 1.0, 0.0], vec![1e5, 0.0, 1.0]];
        let approx = CpTensor::from_terms(shape.clone(), &[big, neg]).unwrap();
        let fit = AlsFit {
            approx,
            residual_history: vec![],
            relative_error: 0.0,
        };
        assert!(!accepts(&fit, 1e-8));
        let fit = AlsFit {
            approx: CpTensor::from_terms(shape, &[vec![vec![0.0, 2.0, 0.0], vec![1e5, 0.0, 1.0]]]).unwrap(),
            ..fit
        };
        assert!(accepts(&fit, 1e-8));
    }

    #[test]
    fn residual_history_is_monotone() {
        let shape = Shape::uniform(6, 3).unwrap();
        let w = random_cp(&shape, 5, 1);
        let init = random_cp(&shape, 3, 2);
        let fit = als_fit(&w, init, &AlsOptions::default()).unwrap();
        for pair in fit.residual_history.windows(2) {
            assert!(pair[1] <= pair[0] * (1.0 + 1e-10) + 1e-24, "{pair:?}");
        }
    }

    #[test]
    fn duplicated_terms_compress_exactly() {
        let shape = Shape::uniform(5, 4).unwrap();
        let w = random_cp(&shape, 2, 3);
        let doubled = w.add(&w).unwrap();
        let t = truncate_als(&doubled, &TruncationPolicy::new(1e-8, 1).unwrap()).unwrap();
        assert!(t.value.rank() <= 2);
        let err = t.value.to_dense().unwrap();
        let exact = w.scale(2.0).to_dense().unwrap();
        let diff: f64 = err.values().iter().zip(exact.values()).map(|(a, b)| (a - b).powi(2)).sum();
        assert!(diff.sqrt() <= 1e-6 * crate::dense::stable_norm(exact.values()));
    }

    #[test]
    fn square_of_rank_two_recompresses() {
        let shape = Shape::uniform(8, 3).unwrap();
        let w = random_cp(&shape, 2, 4);
        let sq = w.hadamard(&w).unwrap();
        assert_eq!(sq.rank(), 4);
        // w (.) w has exact rank 3 since the cross terms coincide.
        let t = truncate_als(&sq, &TruncationPolicy::new(1e-6, 1).unwrap()).unwrap();
        assert!(t.value.rank() <= 3, "rank {}", t.value.rank());
        assert!(!t.tolerance_miss);
    }

    #[test]
    fn rank_cap_reports_tolerance_miss() {
        let shape = Shape::uniform(6, 3).unwrap();
        let w = random_cp(&shape, 4, 5);
        let policy = TruncationPolicy::new(1e-12, 1).unwrap().with_max_rank(1).unwrap();
        let t = truncate_als(&w, &policy).unwrap();
        assert_eq!(t.value.rank(), 1);
        assert!(t.tolerance_miss);
        assert!(t.relative_error > 1e-12);
    }
}
