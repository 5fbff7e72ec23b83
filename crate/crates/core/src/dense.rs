//! Full-storage backend and brute-force oracles.
//!
//! A dense tensor is the vectorization of the data in row-major order, so
//! the Hadamard algebra here is literally entrywise arithmetic on `R^N`.
//! Everything compressed is validated against this module.

use std::cmp::Ordering;

use num_bigint::BigUint;

use crate::algebra::{AlgebraElement, Truncated, TruncationPolicy};
use crate::error::{Error, Result};
use crate::shape::{MultiIndex, Shape};

/// Default limit on the number of stored entries.
pub const DEFAULT_DENSE_CAP: usize = 10_000_000;

/// Dense cap, overridable through `HADALG_DENSE_CAP`.
pub fn dense_cap() -> usize {
    std::env::var("HADALG_DENSE_CAP")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_DENSE_CAP)
}

/// Number of entries of `shape` if it may be stored densely.
pub fn checked_dense_len(shape: &Shape) -> Result<usize> {
    let cap = dense_cap();
    match shape.total_size_usize() {
        Some(n) if n <= cap => Ok(n),
        _ => Err(Error::DenseCapExceeded {
            requested: shape.total_size().to_string(),
            cap,
        }),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Shape,
    values: Vec<f64>,
}

impl DenseTensor {
    pub fn from_vec(shape: Shape, values: Vec<f64>) -> Result<Self> {
        let n = checked_dense_len(&shape)?;
        if values.len() != n {
            return Err(Error::InvalidParameter(format!(
                "{} values for shape {shape} with {n} entries",
                values.len()
            )));
        }
        Ok(Self { shape, values })
    }

    /// Samples `f` at every multi-index of `shape`.
    pub fn from_function(shape: Shape, f: impl Fn(&MultiIndex) -> f64) -> Result<Self> {
        let n = checked_dense_len(&shape)?;
        let values = (0..n).map(|k| f(&shape.multi_index(k))).collect();
        Ok(Self { shape, values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            shape: self.shape.clone(),
            values: self.values.iter().map(|&x| f(x)).collect(),
        }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self {
            shape: self.shape.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Largest entry and its position; ties go to the smallest row-major
    /// linear index.
    pub fn argmax(&self) -> (MultiIndex, f64) {
        let mut best = 0usize;
        for (k, &x) in self.values.iter().enumerate() {
            if x > self.values[best] {
                best = k;
            }
        }
        (self.shape.multi_index(best), self.values[best])
    }

    pub fn argmin(&self) -> (MultiIndex, f64) {
        let mut best = 0usize;
        for (k, &x) in self.values.iter().enumerate() {
            if x < self.values[best] {
                best = k;
            }
        }
        (self.shape.multi_index(best), self.values[best])
    }

    /// Entry closest to `rho`, smallest linear index on ties.
    pub fn argclosest(&self, rho: f64) -> (MultiIndex, f64) {
        let mut best = 0usize;
        for (k, &x) in self.values.iter().enumerate() {
            if (x - rho).abs() < (self.values[best] - rho).abs() {
                best = k;
            }
        }
        (self.shape.multi_index(best), self.values[best])
    }

    /// Exact number of entries in the open interval `]lower, upper[`.
    pub fn level_count(&self, lower: f64, upper: f64) -> Result<BigUint> {
        if !(lower < upper) {
            return Err(Error::InvalidParameter(format!(
                "interval ]{lower}, {upper}[ is empty"
            )));
        }
        let count = self.values.iter().filter(|&&x| x > lower && x < upper).count();
        Ok(BigUint::from(count))
    }

    /// `(mean, variance)` with the population normalization `1/N`.
    pub fn mean_var(&self) -> (f64, f64) {
        let n = self.values.len() as f64;
        let mean = self.values.iter().sum::<f64>() / n;
        let var = self.values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        (mean, var)
    }

    /// Entry values sorted by decreasing absolute value, with multiplicity.
    pub fn spectrum(&self) -> Vec<f64> {
        let mut s = self.values.clone();
        s.sort_by(|a, b| b.abs().partial_cmp(&a.abs()).unwrap_or(Ordering::Equal));
        s
    }

    /// `min_j |lambda_j - mu|` over the spectrum.
    pub fn spectral_distance(&self, mu: f64) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, &x| m.min((x - mu).abs()))
    }

    /// Entrywise sign with `sign(0) = 0`.
    pub fn sign(&self) -> Self {
        self.map(|x| {
            if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                0.0
            }
        })
    }
}

/// Scaled Euclidean norm that neither overflows nor underflows for finite
/// inputs.
pub(crate) fn stable_norm(values: &[f64]) -> f64 {
    let scale = values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    let s: f64 = values.iter().map(|x| (x / scale) * (x / scale)).sum();
    scale * s.sqrt()
}

impl AlgebraElement for DenseTensor {
    fn shape(&self) -> &Shape {
        &self.shape
    }

    fn rank_one(shape: &Shape, factors: &[Vec<f64>]) -> Result<Self> {
        check_factors(shape, factors)?;
        Self::from_function(shape.clone(), |m| {
            m.as_slice()
                .iter()
                .zip(factors)
                .map(|(&i, f)| f[i])
                .product()
        })
    }

    fn zero(shape: &Shape) -> Self {
        let n = checked_dense_len(shape).expect("shape within dense cap");
        Self {
            shape: shape.clone(),
            values: vec![0.0; n],
        }
    }

    fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn scale(&self, alpha: f64) -> Self {
        self.map(|x| alpha * x)
    }

    fn hadamard(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    fn inner(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum())
    }

    fn norm(&self) -> f64 {
        stable_norm(&self.values)
    }

    fn distance(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other)?;
        let diff: Vec<f64> = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(stable_norm(&diff))
    }

    fn entry(&self, index: &MultiIndex) -> Result<f64> {
        Ok(self.values[self.shape.linear_index(index)?])
    }

    fn rank(&self) -> usize {
        1
    }

    fn truncate(&self, _policy: &TruncationPolicy) -> Result<Truncated<Self>> {
        Ok(Truncated::exact(self.clone()))
    }

    fn locate_peak(&self) -> Result<MultiIndex> {
        let mut best = 0usize;
        for (k, x) in self.values.iter().enumerate() {
            if x.abs() > self.values[best].abs() {
                best = k;
            }
        }
        Ok(self.shape.multi_index(best))
    }

    fn sup_norm_hint(&self) -> Option<f64> {
        Some(self.sup_norm())
    }

    fn unit(shape: &Shape) -> Self {
        let n = checked_dense_len(shape).expect("shape within dense cap");
        Self {
            shape: shape.clone(),
            values: vec![1.0; n],
        }
    }

    fn basis(shape: &Shape, index: &MultiIndex) -> Result<Self> {
        let mut e = Self::zero(shape);
        let k = shape.linear_index(index)?;
        e.values[k] = 1.0;
        Ok(e)
    }

    fn shift(&self, beta: f64) -> Result<Self> {
        Ok(self.map(|x| x + beta))
    }
}

pub(crate) fn check_factors(shape: &Shape, factors: &[Vec<f64>]) -> Result<()> {
    if factors.len() != shape.order()
        || factors.iter().zip(shape.mode_sizes()).any(|(f, &m)| f.len() != m)
    {
        return Err(Error::InvalidParameter(format!(
            "factor lengths {:?} do not match shape {shape}",
            factors.iter().map(Vec::len).collect::<Vec<_>>()
        )));
    }
    Ok(())
}
