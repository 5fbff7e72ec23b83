//! Synthetic inputs: the Poisson right-hand side, seeded random tensors and
//! grid samples of separable functions.
//!
//! Grids are the interior points `x_j = j / (n + 1)`, `j = 1..n`, of the
//! unit interval in every mode.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::AlgebraElement;
use crate::cp::CpTensor;
use crate::error::{Error, Result};
use crate::shape::Shape;
use crate::tt::{TtCore, TtTensor};

/// Interior grid `j / (n + 1)`.
pub fn grid(n: usize) -> Vec<f64> {
    (1..=n).map(|j| j as f64 / (n + 1) as f64).collect()
}

/// `x (1 - x)` at the grid points, evaluated as `j (n + 1 - j) / (n + 1)^2`
/// so that mirror-image points give bit-identical values.
pub fn bubble(n: usize) -> Vec<f64> {
    let h = (n + 1) as f64;
    (1..=n).map(|j| (j * (n + 1 - j)) as f64 / (h * h)).collect()
}

/// Grid samples of `f(x) = sum_k prod_{l != k} x_l (1 - x_l)`, the
/// right-hand side of the d-dimensional Poisson model problem, as an exact
/// CP tensor of rank `d`.
pub fn poisson_rhs(n: usize, d: usize) -> Result<CpTensor> {
    let shape = Shape::uniform(n, d)?;
    let g = bubble(n);
    let ones = vec![1.0; n];
    let terms: Vec<Vec<Vec<f64>>> = (0..d)
        .map(|k| (0..d).map(|l| if l == k { ones.clone() } else { g.clone() }).collect())
        .collect();
    CpTensor::from_terms(shape, &terms)
}

/// CP tensor with factor entries uniform in `[-1, 1]`.
pub fn random_cp(shape: &Shape, rank: usize, seed: u64) -> Result<CpTensor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terms: Vec<Vec<Vec<f64>>> = (0..rank)
        .map(|_| {
            shape
                .mode_sizes()
                .iter()
                .map(|&m| (0..m).map(|_| rng.gen_range(-1.0..=1.0)).collect())
                .collect()
        })
        .collect();
    CpTensor::from_terms(shape.clone(), &terms)
}

/// TT tensor with interior ranks `rank` (capped by the mode sizes at the
/// ends) and core entries uniform in `[-1, 1]`.
pub fn random_tt(shape: &Shape, rank: usize, seed: u64) -> Result<TtTensor> {
    if rank == 0 {
        return Err(Error::InvalidParameter("rank must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = shape.order();
    let cores = (0..d)
        .map(|k| {
            let rl = if k == 0 { 1 } else { rank };
            let rr = if k == d - 1 { 1 } else { rank };
            let n = shape.mode_size(k);
            TtCore::new(rl, n, rr, (0..rl * n * rr).map(|_| rng.gen_range(-1.0..=1.0)).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    TtTensor::new(cores)
}

/// Dominant factor entries have modulus in `[SIGN_DOMINANT_FLOOR, 1]`.
pub const SIGN_DOMINANT_FLOOR: f64 = 0.93;

/// CP tensor of rank `rank` whose entries stay well away from zero, for
/// sign and level-set experiments.
///
/// One dominant elementary term has factor entries of modulus in
/// `[0.93, 1]` with random signs; the other `rank - 1` terms are random and
/// scaled so that together they never exceed `0.1 * 0.93^d` in modulus.
/// Hence `|w_m| >= 0.9 * 0.93^d` and `|w|_inf <= 1 + 0.1 * 0.93^d`, so every
/// entry lies at least `0.05 |w|_inf` from zero for `d <= 38`.
pub fn separated_cp(n: usize, d: usize, rank: usize, seed: u64) -> Result<CpTensor> {
    if rank == 0 {
        return Err(Error::InvalidParameter("rank must be >= 1".into()));
    }
    let shape = Shape::uniform(n, d)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dominant: Vec<Vec<f64>> = (0..d)
        .map(|_| {
            (0..n)
                .map(|_| {
                    let m = rng.gen_range(SIGN_DOMINANT_FLOOR..=1.0);
                    if rng.gen_bool(0.5) { m } else { -m }
                })
                .collect()
        })
        .collect();
    let mut terms = vec![dominant];
    if rank > 1 {
        let amp = 0.1 * SIGN_DOMINANT_FLOOR.powi(d as i32) / (rank - 1) as f64;
        let per_mode = amp.powf(1.0 / d as f64);
        for _ in 1..rank {
            terms.push(
                (0..d)
                    .map(|_| (0..n).map(|_| per_mode * rng.gen_range(-1.0..=1.0)).collect())
                    .collect(),
            );
        }
    }
    CpTensor::from_terms(shape, &terms)
}

/// Separable functions with exact low-rank grid samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampledFunction {
    /// `c`, rank 1.
    Constant(f64),
    /// `sum_l x_l`, rank `d`.
    Sum,
    /// `prod_l sin(pi x_l)`, rank 1.
    SinProduct,
    /// `exp(-|x|^2)`, rank 1.
    Gaussian,
}

impl SampledFunction {
    /// Pointwise value, for checking samples.
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            SampledFunction::Constant(c) => c,
            SampledFunction::Sum => x.iter().sum(),
            SampledFunction::SinProduct => x.iter().map(|t| (std::f64::consts::PI * t).sin()).product(),
            SampledFunction::Gaussian => (-x.iter().map(|t| t * t).sum::<f64>()).exp(),
        }
    }
}

/// CP representation of the grid samples of `f` on `n^d` points.
pub fn sample_function(f: SampledFunction, n: usize, d: usize) -> Result<CpTensor> {
    let shape = Shape::uniform(n, d)?;
    let x = grid(n);
    match f {
        SampledFunction::Constant(c) => Ok(CpTensor::unit(&shape).scale(c)),
        SampledFunction::Sum => {
            let ones = vec![1.0; n];
            let terms: Vec<Vec<Vec<f64>>> = (0..d)
                .map(|k| (0..d).map(|l| if l == k { x.clone() } else { ones.clone() }).collect())
                .collect();
            CpTensor::from_terms(shape, &terms)
        }
        SampledFunction::SinProduct => {
            let s: Vec<f64> = x.iter().map(|t| (std::f64::consts::PI * t).sin()).collect();
            CpTensor::rank_one(&shape, &vec![s; d])
        }
        SampledFunction::Gaussian => {
            let g: Vec<f64> = x.iter().map(|t| (-t * t).exp()).collect();
            CpTensor::rank_one(&shape, &vec![g; d])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shape::MultiIndex;
    use approx::assert_relative_eq;

    #[test]
    fn poisson_rhs_matches_direct_sampling() {
        let (n, d) = (5, 3);
        let w = poisson_rhs(n, d).unwrap();
        assert_eq!(w.rank(), d);
        let dense = w.to_dense().unwrap();
        let h = 1.0 / (n as f64 + 1.0);
        for m in w.shape().indices() {
            let x: Vec<f64> = m.as_slice().iter().map(|&i| (i + 1) as f64 * h).collect();
            let f: f64 = (0..d)
                .map(|k| (0..d).filter(|&l| l != k).map(|l| x[l] * (1.0 - x[l])).product::<f64>())
                .sum();
            let got = dense.values()[w.shape().linear_index(&m).unwrap()];
            assert_relative_eq!(got, f, max_relative = 1e-14);
        }
    }

    #[test]
    fn bubble_is_symmetric() {
        let g = bubble(100);
        for j in 0..100 {
            assert_eq!(g[j], g[99 - j]);
        }
    }

    #[test]
    fn random_tensors_are_deterministic() {
        let shape = Shape::new(vec![3, 4, 2]).unwrap();
        assert_eq!(random_cp(&shape, 2, 9).unwrap(), random_cp(&shape, 2, 9).unwrap());
        assert_ne!(random_cp(&shape, 2, 9).unwrap(), random_cp(&shape, 2, 10).unwrap());
        assert_eq!(random_tt(&shape, 3, 1).unwrap(), random_tt(&shape, 3, 1).unwrap());
    }

    #[test]
    fn separated_entries_keep_their_margin() {
        let w = separated_cp(3, 8, 4, 2).unwrap().to_dense().unwrap();
        let floor = 0.9 * SIGN_DOMINANT_FLOOR.powi(8);
        assert!(w.values().iter().all(|x| x.abs() >= floor));
        assert!(w.sup_norm() <= 1.0 + 0.1 * SIGN_DOMINANT_FLOOR.powi(8));
    }

    #[test]
    fn function_samples() {
        let one = sample_function(SampledFunction::Constant(1.0), 4, 3).unwrap();
        assert_eq!(one, CpTensor::unit(&Shape::uniform(4, 3).unwrap()));
        for f in [SampledFunction::Sum, SampledFunction::SinProduct, SampledFunction::Gaussian] {
            let w = sample_function(f, 4, 3).unwrap();
            let m = MultiIndex(vec![0, 3, 1]);
            let x: Vec<f64> = m.as_slice().iter().map(|&i| (i + 1) as f64 / 5.0).collect();
            assert_relative_eq!(w.entry(&m).unwrap(), f.eval(&x), max_relative = 1e-14);
        }
    }
}
