//! Mode sizes and multi-indices.
//!
//! Linearization is row-major: the last mode varies fastest. Multi-indices
//! are 0-based in storage; human-facing output adds one.

use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    mode_sizes: Vec<usize>,
}

impl Shape {
    pub fn new(mode_sizes: Vec<usize>) -> Result<Self> {
        if mode_sizes.is_empty() {
            return Err(Error::InvalidParameter("a shape needs at least one mode".into()));
        }
        if mode_sizes.iter().any(|&m| m == 0) {
            return Err(Error::InvalidParameter(format!(
                "mode sizes must be positive, got {mode_sizes:?}"
            )));
        }
        Ok(Self { mode_sizes })
    }

    /// `d` modes of size `n` each.
    pub fn uniform(n: usize, d: usize) -> Result<Self> {
        Self::new(vec![n; d])
    }

    pub fn order(&self) -> usize {
        self.mode_sizes.len()
    }

    pub fn mode_sizes(&self) -> &[usize] {
        &self.mode_sizes
    }

    pub fn mode_size(&self, mode: usize) -> usize {
        self.mode_sizes[mode]
    }

    /// Exact number of entries `N = M_1 * ... * M_d`.
    pub fn total_size(&self) -> BigUint {
        self.mode_sizes
            .iter()
            .fold(BigUint::one(), |acc, &m| acc * BigUint::from(m))
    }

    /// `N` when it fits a machine word.
    pub fn total_size_usize(&self) -> Option<usize> {
        self.mode_sizes
            .iter()
            .try_fold(1usize, |acc, &m| acc.checked_mul(m))
    }

    /// `N` as a float; infinite once it exceeds the `f64` range.
    pub fn total_size_f64(&self) -> f64 {
        self.total_size().to_f64().unwrap_or(f64::INFINITY)
    }

    pub fn check_index(&self, index: &MultiIndex) -> Result<()> {
        let ok = index.0.len() == self.order()
            && index.0.iter().zip(&self.mode_sizes).all(|(&i, &m)| i < m);
        if ok {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                index: index.0.clone(),
                shape: self.mode_sizes.clone(),
            })
        }
    }

    /// Row-major linear position of `index`.
    pub fn linear_index(&self, index: &MultiIndex) -> Result<usize> {
        self.check_index(index)?;
        let mut lin = 0usize;
        for (&i, &m) in index.0.iter().zip(&self.mode_sizes) {
            lin = lin
                .checked_mul(m)
                .and_then(|x| x.checked_add(i))
                .ok_or_else(|| Error::InvalidParameter("linear index overflows".into()))?;
        }
        Ok(lin)
    }

    pub fn multi_index(&self, mut linear: usize) -> MultiIndex {
        let mut idx = vec![0; self.order()];
        for (slot, &m) in idx.iter_mut().zip(&self.mode_sizes).rev() {
            *slot = linear % m;
            linear /= m;
        }
        MultiIndex(idx)
    }

    /// Iterates all multi-indices in row-major order. Only sensible for
    /// shapes small enough to enumerate.
    pub fn indices(&self) -> impl Iterator<Item = MultiIndex> + '_ {
        let n = self.total_size_usize().unwrap_or(usize::MAX);
        (0..n).map(move |k| self.multi_index(k))
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.mode_sizes.iter().map(|m| m.to_string()).collect();
        write!(f, "({})", parts.join("x"))
    }
}

/// Position in a tensor, one 0-based entry per mode.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<usize>);

impl MultiIndex {
    pub fn new(indices: Vec<usize>) -> Self {
        Self(indices)
    }

    /// Builds from 1-based positions as printed by the CLI.
    pub fn from_one_based(indices: &[usize]) -> Result<Self> {
        indices
            .iter()
            .map(|&i| {
                i.checked_sub(1)
                    .ok_or_else(|| Error::InvalidParameter("1-based index must be >= 1".into()))
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.0.iter().map(|i| i + 1).collect()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.one_based().iter().map(|m| m.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_zero_modes() {
        assert!(Shape::new(vec![]).is_err());
        assert!(Shape::new(vec![3, 0]).is_err());
    }

    #[test]
    fn total_size_is_exact_beyond_f64() {
        let s = Shape::uniform(100, 800).unwrap();
        let n = s.total_size();
        assert_eq!(n.to_string().len(), 1601);
        assert!(s.total_size_usize().is_none());
        assert!(s.total_size_f64().is_infinite());
    }

    #[test]
    fn row_major_round_trip() {
        let s = Shape::new(vec![2, 3, 4]).unwrap();
        for k in 0..24 {
            let m = s.multi_index(k);
            assert_eq!(s.linear_index(&m).unwrap(), k);
        }
        assert_eq!(s.multi_index(1).0, vec![0, 0, 1]);
        assert_eq!(s.multi_index(4).0, vec![0, 1, 0]);
    }

    #[test]
    fn out_of_range_index() {
        let s = Shape::new(vec![2, 2]).unwrap();
        assert!(s.check_index(&MultiIndex(vec![2, 0])).is_err());
        assert!(s.check_index(&MultiIndex(vec![0])).is_err());
    }

    #[test]
    fn one_based_display() {
        let m = MultiIndex::from_one_based(&[1, 3]).unwrap();
        assert_eq!(m.0, vec![0, 2]);
        assert_eq!(m.to_string(), "(1,3)");
    }
}
