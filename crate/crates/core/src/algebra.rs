//! The Euclidean commutative algebra every storage backend implements.
//!
//! Algorithms in [`crate::postproc`] and [`crate::iteration`] only talk to
//! this trait, so the same code runs on dense, CP and TT data.

use std::fmt::Debug;

use crate::error::{Error, Result};
use crate::shape::{MultiIndex, Shape};

/// Default limit on the number of values one compressed representation
/// may hold: 2^27 doubles, 1 GiB.
pub const DEFAULT_STORAGE_CAP: usize = 1 << 27;

/// Storage cap for compressed products, overridable through
/// `HADALG_STORAGE_CAP`. Hadamard products multiply ranks before any
/// truncation can act, so an unchecked product can exhaust memory.
pub fn storage_cap() -> usize {
    std::env::var("HADALG_STORAGE_CAP")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_STORAGE_CAP)
}

pub(crate) fn check_storage(values: Option<usize>) -> Result<()> {
    let cap = storage_cap();
    match values {
        Some(v) if v <= cap => Ok(()),
        _ => Err(Error::StorageCapExceeded {
            requested: values.map_or_else(|| "more than usize::MAX".to_string(), |v| v.to_string()),
            cap,
        }),
    }
}

/// Recompression settings for the truncation map `T_eps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    /// Relative tolerance: the truncated `w*` satisfies `|w - w*| <= epsilon |w|`
    /// unless the rank cap binds.
    pub epsilon: f64,
    pub max_rank: Option<usize>,
    /// Iterates whose representation rank exceeds this are recompressed.
    pub trigger_rank: usize,
}

impl TruncationPolicy {
    pub fn new(epsilon: f64, trigger_rank: usize) -> Result<Self> {
        let policy = Self {
            epsilon,
            max_rank: None,
            trigger_rank,
        };
        policy.validate()?;
        Ok(policy)
    }

    /// Default trigger of twice the input rank.
    pub fn for_input_rank(epsilon: f64, input_rank: usize) -> Result<Self> {
        Self::new(epsilon, 2 * input_rank.max(1))
    }

    /// Never truncates.
    pub fn exact() -> Self {
        Self {
            epsilon: 0.0,
            max_rank: None,
            trigger_rank: usize::MAX,
        }
    }

    pub fn with_max_rank(mut self, max_rank: usize) -> Result<Self> {
        self.max_rank = Some(max_rank);
        self.validate()?;
        Ok(self)
    }

    pub fn with_trigger_rank(mut self, trigger_rank: usize) -> Result<Self> {
        self.trigger_rank = trigger_rank;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "truncation epsilon must be finite and >= 0, got {}",
                self.epsilon
            )));
        }
        if self.max_rank == Some(0) {
            return Err(Error::InvalidParameter("max_rank must be >= 1".into()));
        }
        if self.trigger_rank == 0 {
            return Err(Error::InvalidParameter("trigger_rank must be >= 1".into()));
        }
        Ok(())
    }
}

/// Outcome of one recompression.
#[derive(Debug, Clone)]
pub struct Truncated<E> {
    pub value: E,
    /// Estimated `|w - w*| / |w|`.
    pub relative_error: f64,
    /// The rank cap prevented reaching `epsilon`.
    pub tolerance_miss: bool,
}

impl<E> Truncated<E> {
    pub fn exact(value: E) -> Self {
        Self {
            value,
            relative_error: 0.0,
            tolerance_miss: false,
        }
    }
}

/// Operations required of a data representation so that the
/// post-processing algorithms can run on it.
///
/// Elements are immutable values; every operation returns a fresh element.
pub trait AlgebraElement: Clone + Debug + PartialEq + Send + Sync + Sized {
    fn shape(&self) -> &Shape;

    /// Elementary tensor `f_1 (x) ... (x) f_d` from one vector per mode.
    fn rank_one(shape: &Shape, factors: &[Vec<f64>]) -> Result<Self>;

    fn zero(shape: &Shape) -> Self;

    fn add(&self, other: &Self) -> Result<Self>;

    fn scale(&self, alpha: f64) -> Self;

    fn hadamard(&self, other: &Self) -> Result<Self>;

    fn inner(&self, other: &Self) -> Result<f64>;

    fn entry(&self, index: &MultiIndex) -> Result<f64>;

    /// Representation rank: term count for CP, largest interior rank for
    /// TT, 1 for full storage.
    fn rank(&self) -> usize;

    fn truncate(&self, policy: &TruncationPolicy) -> Result<Truncated<Self>>;

    /// Position carrying the bulk of the mass of a (nearly) rank-one
    /// element such as a converged eigenvector `+-e^(m)`.
    fn locate_peak(&self) -> Result<MultiIndex>;

    fn norm(&self) -> f64 {
        self.inner(self).map(|x| x.max(0.0).sqrt()).unwrap_or(f64::NAN)
    }

    /// `|self - other|`. Backends override this when they can avoid the
    /// cancellation of `|a|^2 + |b|^2 - 2<a,b>`.
    fn distance(&self, other: &Self) -> Result<f64> {
        Ok(self.sub(other)?.norm())
    }

    /// Exact sup-norm when it is cheap to get.
    fn sup_norm_hint(&self) -> Option<f64> {
        None
    }

    fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    /// Hadamard unit `1`, the all-ones tensor.
    fn unit(shape: &Shape) -> Self {
        let factors: Vec<Vec<f64>> = shape.mode_sizes().iter().map(|&m| vec![1.0; m]).collect();
        Self::rank_one(shape, &factors).expect("factors match shape")
    }

    /// `1 / sqrt(N)` built mode by mode so that it stays representable for
    /// astronomically large `N`.
    fn normalized_unit(shape: &Shape) -> Self {
        let factors: Vec<Vec<f64>> = shape
            .mode_sizes()
            .iter()
            .map(|&m| vec![1.0 / (m as f64).sqrt(); m])
            .collect();
        Self::rank_one(shape, &factors).expect("factors match shape")
    }

    /// Uniform probability weights `1 / N`, again built mode by mode.
    fn uniform_weights(shape: &Shape) -> Self {
        let factors: Vec<Vec<f64>> = shape
            .mode_sizes()
            .iter()
            .map(|&m| vec![1.0 / m as f64; m])
            .collect();
        Self::rank_one(shape, &factors).expect("factors match shape")
    }

    /// Canonical unit tensor `e^(m)`.
    fn basis(shape: &Shape, index: &MultiIndex) -> Result<Self> {
        shape.check_index(index)?;
        let factors: Vec<Vec<f64>> = shape
            .mode_sizes()
            .iter()
            .zip(index.as_slice())
            .map(|(&m, &i)| {
                let mut f = vec![0.0; m];
                f[i] = 1.0;
                f
            })
            .collect();
        Self::rank_one(shape, &factors)
    }

    /// `self + beta * 1`.
    fn shift(&self, beta: f64) -> Result<Self> {
        self.add(&Self::unit(self.shape()).scale(beta))
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape() == other.shape() {
            Ok(())
        } else {
            Err(Error::shape_mismatch(self.shape(), other.shape()))
        }
    }

    /// Truncates only when the representation rank exceeds the trigger.
    fn truncate_if_needed(&self, policy: &TruncationPolicy) -> Result<Truncated<Self>> {
        if self.rank() > policy.trigger_rank {
            self.truncate(policy)
        } else {
            Ok(Truncated::exact(self.clone()))
        }
    }
}

/// `phi(w) = <w, 1>`, the sum of all entries.
pub fn state_functional<E: AlgebraElement>(w: &E) -> Result<f64> {
    w.inner(&E::unit(w.shape()))
}

/// Mean over all entries, `<w, 1> / N`, evaluated against the uniform
/// weights when `<w, 1>` or `N` leaves the floating-point range.
pub fn uniform_mean<E: AlgebraElement>(w: &E) -> Result<f64> {
    let n = w.shape().total_size_f64();
    if n.is_finite() {
        let phi = state_functional(w)?;
        if phi.is_finite() {
            return Ok(phi / n);
        }
    }
    w.inner(&E::uniform_weights(w.shape()))
}
