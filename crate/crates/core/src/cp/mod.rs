//! Canonical polyadic (CP) format: `w = sum_i (x)_nu w_i^(nu)`.
//!
//! Scaling costs `O(r n d)`, addition only concatenates factor lists,
//! the Hadamard product forms all `r_u * r_v` pairwise terms, and the
//! inner product needs `O(r_u r_v n d)` operations. Ranks grow under add
//! and product; [`als`] brings them back down.

mod als;

pub use als::{als_fit, truncate_als, AlsFit, AlsOptions};

use crate::algebra::{check_storage, AlgebraElement, Truncated, TruncationPolicy};
use crate::dense::{check_factors, checked_dense_len, DenseTensor};
use crate::error::{Error, Result};
use crate::shape::{MultiIndex, Shape};

/// Relative score gap below which two candidate positions count as tied in
/// [`AlgebraElement::locate_peak`]; the smaller position wins.
pub(crate) const PEAK_TIE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct CpTensor {
    shape: Shape,
    rank: usize,
    /// Per mode, the `rank` factor vectors stored back to back.
    factors: Vec<Vec<f64>>,
}

impl CpTensor {
    /// `factors[nu]` holds `rank` vectors of length `M_nu`, term after term.
    pub fn new(shape: Shape, rank: usize, factors: Vec<Vec<f64>>) -> Result<Self> {
        if factors.len() != shape.order() {
            return Err(Error::InvalidParameter(format!(
                "{} factor blocks for a tensor of order {}",
                factors.len(),
                shape.order()
            )));
        }
        for (nu, block) in factors.iter().enumerate() {
            if block.len() != rank * shape.mode_size(nu) {
                return Err(Error::InvalidParameter(format!(
                    "mode {nu}: expected {} factor entries, got {}",
                    rank * shape.mode_size(nu),
                    block.len()
                )));
            }
        }
        Ok(Self { shape, rank, factors })
    }

    /// Builds from a list of terms, each a list of `d` mode vectors.
    pub fn from_terms(shape: Shape, terms: &[Vec<Vec<f64>>]) -> Result<Self> {
        let mut factors = vec![Vec::new(); shape.order()];
        for term in terms {
            check_factors(&shape, term)?;
            for (block, v) in factors.iter_mut().zip(term) {
                block.extend_from_slice(v);
            }
        }
        Self::new(shape, terms.len(), factors)
    }

    pub fn order(&self) -> usize {
        self.shape.order()
    }

    pub fn factors(&self) -> &[Vec<f64>] {
        &self.factors
    }

    /// Factor vector of term `i` in mode `nu`.
    pub fn factor(&self, i: usize, nu: usize) -> &[f64] {
        let m = self.shape.mode_size(nu);
        &self.factors[nu][i * m..(i + 1) * m]
    }

    fn factor_mut(&mut self, i: usize, nu: usize) -> &mut [f64] {
        let m = self.shape.mode_size(nu);
        &mut self.factors[nu][i * m..(i + 1) * m]
    }

    pub fn term(&self, i: usize) -> Vec<Vec<f64>> {
        (0..self.order()).map(|nu| self.factor(i, nu).to_vec()).collect()
    }

    /// `prod_nu |w_i^(nu)|` for every term, accumulated in log space.
    pub fn term_norms(&self) -> Vec<f64> {
        (0..self.rank)
            .map(|i| {
                let mut log = 0.0;
                for nu in 0..self.order() {
                    let n = crate::dense::stable_norm(self.factor(i, nu));
                    if n == 0.0 {
                        return 0.0;
                    }
                    log += n.ln();
                }
                log.exp()
            })
            .collect()
    }

    /// Same tensor with every term's mode vectors rescaled to a common
    /// norm. Signs stay where they were.
    pub fn balanced(&self) -> Self {
        let mut out = self.clone();
        let d = self.order() as f64;
        for i in 0..self.rank {
            let norms: Vec<f64> = (0..self.order())
                .map(|nu| crate::dense::stable_norm(self.factor(i, nu)))
                .collect();
            if norms.iter().any(|&n| n == 0.0 || !n.is_finite()) {
                continue;
            }
            let log_mean = norms.iter().map(|n| n.ln()).sum::<f64>() / d;
            for (nu, n) in norms.iter().enumerate() {
                let s = (log_mean - n.ln()).exp();
                out.factor_mut(i, nu).iter_mut().for_each(|x| *x *= s);
            }
        }
        out
    }

    /// Per-mode Gram matrix `G[j][k] = <self_j^(nu), other_k^(nu)>`,
    /// row-major `r_self x r_other`.
    pub(crate) fn mode_gram(&self, other: &Self, nu: usize) -> Vec<f64> {
        let (ra, rb) = (self.rank, other.rank);
        let mut g = vec![0.0; ra * rb];
        for j in 0..ra {
            let a = self.factor(j, nu);
            for k in 0..rb {
                let b = other.factor(k, nu);
                g[j * rb + k] = a.iter().zip(b).map(|(x, y)| x * y).sum();
            }
        }
        g
    }

    /// Sum over all term pairs of the product of mode inner products,
    /// i.e. `<self, other>`, computed one row at a time so that the full
    /// `r1 x r2` matrix is never stored.
    pub(crate) fn gram_sum(&self, other: &Self) -> f64 {
        let d = self.order();
        let mut row = vec![0.0; other.rank];
        let mut total = 0.0;
        for j in 0..self.rank {
            row.fill(1.0);
            for nu in 0..d {
                let a = self.factor(j, nu);
                for (k, acc) in row.iter_mut().enumerate() {
                    *acc *= a.iter().zip(other.factor(k, nu)).map(|(x, y)| x * y).sum::<f64>();
                }
            }
            total += row.iter().sum::<f64>();
        }
        total
    }

    pub fn to_dense(&self) -> Result<DenseTensor> {
        checked_dense_len(&self.shape)?;
        DenseTensor::from_function(self.shape.clone(), |m| self.eval(m.as_slice()))
    }

    /// Exact CP representation of a dense tensor: one term per nonzero
    /// fibre along the last mode.
    pub fn from_dense(w: &DenseTensor) -> Result<Self> {
        let shape = w.shape().clone();
        let d = shape.order();
        let last = shape.mode_size(d - 1);
        let mut terms = Vec::new();
        for (p, fibre) in w.values().chunks(last).enumerate() {
            if fibre.iter().all(|&x| x == 0.0) {
                continue;
            }
            let prefix = shape.multi_index(p * last);
            let mut term: Vec<Vec<f64>> = (0..d - 1)
                .map(|nu| {
                    let mut e = vec![0.0; shape.mode_size(nu)];
                    e[prefix.0[nu]] = 1.0;
                    e
                })
                .collect();
            term.push(fibre.to_vec());
            terms.push(term);
        }
        Self::from_terms(shape, &terms)
    }

    fn eval(&self, m: &[usize]) -> f64 {
        let mut sum = 0.0;
        for i in 0..self.rank {
            let mut p = 1.0;
            for (nu, &mi) in m.iter().enumerate() {
                p *= self.factor(i, nu)[mi];
            }
            sum += p;
        }
        sum
    }

    /// Collapses terms that are parallel in every mode and drops zero
    /// terms. Exact up to rounding.
    pub fn merge_parallel_terms(&self) -> Self {
        let mut kept: Vec<Vec<Vec<f64>>> = Vec::new();
        'terms: for i in 0..self.rank {
            let term = self.term(i);
            if term.iter().any(|v| v.iter().all(|&x| x == 0.0)) {
                continue;
            }
            for other in kept.iter_mut() {
                if let Some(c) = parallel_coefficient(other, &term) {
                    other[0].iter_mut().for_each(|x| *x *= 1.0 + c);
                    continue 'terms;
                }
            }
            kept.push(term);
        }
        kept.retain(|t| t[0].iter().any(|&x| x != 0.0));
        Self::from_terms(self.shape.clone(), &kept).expect("terms match shape")
    }
}

/// `c` with `term = c * base` when the two terms are parallel in every mode.
fn parallel_coefficient(base: &[Vec<f64>], term: &[Vec<f64>]) -> Option<f64> {
    let mut c = 1.0;
    for (a, b) in base.iter().zip(term) {
        let na = crate::dense::stable_norm(a);
        let nb = crate::dense::stable_norm(b);
        if na == 0.0 || nb == 0.0 {
            return None;
        }
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let s = dot.signum();
        let aligned = a
            .iter()
            .zip(b)
            .all(|(x, y)| (x / na - s * y / nb).abs() <= 1e-14);
        if !aligned {
            return None;
        }
        c *= s * nb / na;
    }
    Some(c)
}

impl AlgebraElement for CpTensor {
    fn shape(&self) -> &Shape {
        &self.shape
    }

    fn rank_one(shape: &Shape, factors: &[Vec<f64>]) -> Result<Self> {
        Self::from_terms(shape.clone(), &[factors.to_vec()])
    }

    fn zero(shape: &Shape) -> Self {
        Self {
            shape: shape.clone(),
            rank: 0,
            factors: vec![Vec::new(); shape.order()],
        }
    }

    fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let factors = self
            .factors
            .iter()
            .zip(&other.factors)
            .map(|(a, b)| {
                let mut v = Vec::with_capacity(a.len() + b.len());
                v.extend_from_slice(a);
                v.extend_from_slice(b);
                v
            })
            .collect();
        Ok(Self {
            shape: self.shape.clone(),
            rank: self.rank + other.rank,
            factors,
        })
    }

    /// Spreads `|alpha|^(1/d)` over all modes; the sign goes to mode 1.
    fn scale(&self, alpha: f64) -> Self {
        let d = self.order();
        let root = match d {
            1 => alpha.abs(),
            2 => alpha.abs().sqrt(),
            3 => alpha.abs().cbrt(),
            _ => alpha.abs().powf(1.0 / d as f64),
        };
        let mut out = self.clone();
        for (nu, block) in out.factors.iter_mut().enumerate() {
            let s = if nu == 0 { root.copysign(alpha) } else { root };
            block.iter_mut().for_each(|x| *x *= s);
        }
        out
    }

    fn hadamard(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let total: usize = self.shape.mode_sizes().iter().sum();
        check_storage(self.rank.checked_mul(other.rank).and_then(|r| r.checked_mul(total)))?;
        let factors = (0..self.order())
            .map(|nu| {
                let m = self.shape.mode_size(nu);
                let mut block = Vec::with_capacity(self.rank * other.rank * m);
                for j in 0..self.rank {
                    let a = self.factor(j, nu);
                    for k in 0..other.rank {
                        let b = other.factor(k, nu);
                        block.extend(a.iter().zip(b).map(|(x, y)| x * y));
                    }
                }
                block
            })
            .collect();
        Ok(Self {
            shape: self.shape.clone(),
            rank: self.rank * other.rank,
            factors,
        })
    }

    fn inner(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self.gram_sum(other))
    }

    fn entry(&self, index: &MultiIndex) -> Result<f64> {
        self.shape.check_index(index)?;
        Ok(self.eval(index.as_slice()))
    }

    fn rank(&self) -> usize {
        self.rank
    }

    fn truncate(&self, policy: &TruncationPolicy) -> Result<Truncated<Self>> {
        truncate_als(self, policy)
    }

    /// Parallel terms are merged before the Gram sum, so differences of
    /// nearly equal rank-one tensors do not cancel catastrophically.
    fn distance(&self, other: &Self) -> Result<f64> {
        Ok(self.sub(other)?.merge_parallel_terms().norm())
    }

    /// Greedy mode-by-mode choice of the position with the largest
    /// marginal energy `sum_rest w(m_1..m_k, rest)^2`.
    fn locate_peak(&self) -> Result<MultiIndex> {
        let d = self.order();
        let r = self.rank;
        if r == 0 {
            return Err(Error::DegenerateIterate("cannot locate the peak of zero".into()));
        }
        // suffix[k] = prod_{nu >= k} Gram_nu, suffix[d] = ones.
        let mut suffix = vec![vec![1.0; r * r]; d + 1];
        for nu in (0..d).rev() {
            let g = self.mode_gram(self, nu);
            suffix[nu] = suffix[nu + 1].iter().zip(&g).map(|(a, b)| a * b).collect();
        }
        let mut coeff = vec![1.0; r];
        let mut chosen = Vec::with_capacity(d);
        for nu in 0..d {
            let right = &suffix[nu + 1];
            let m = self.shape.mode_size(nu);
            let scores: Vec<f64> = (0..m)
                .map(|i| {
                    let x: Vec<f64> = (0..r).map(|j| coeff[j] * self.factor(j, nu)[i]).collect();
                    let mut s = 0.0;
                    for j in 0..r {
                        for l in 0..r {
                            s += x[j] * right[j * r + l] * x[l];
                        }
                    }
                    s
                })
                .collect();
            let best = pick_with_ties(&scores);
            chosen.push(best);
            for (j, c) in coeff.iter_mut().enumerate() {
                *c *= self.factor(j, nu)[best];
            }
            let scale = coeff.iter().fold(0.0f64, |a, c| a.max(c.abs()));
            if scale > 0.0 {
                coeff.iter_mut().for_each(|c| *c /= scale);
            }
        }
        Ok(MultiIndex(chosen))
    }
}

/// Index of the maximal score; near-ties resolve to the smallest index.
pub(crate) fn pick_with_ties(scores: &[f64]) -> usize {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    scores
        .iter()
        .position(|&s| s >= max - PEAK_TIE_TOL * max.abs())
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn s(sizes: &[usize]) -> Shape {
        Shape::new(sizes.to_vec()).unwrap()
    }

    #[test]
    fn scale_spreads_root_over_modes() {
        let u = CpTensor::unit(&s(&[2, 2, 2]));
        let w = u.scale(8.0);
        for nu in 0..3 {
            for &x in w.factor(0, nu) {
                assert_relative_eq!(x, 2.0, max_relative = 1e-15);
            }
        }
        assert_relative_eq!(w.entry(&MultiIndex(vec![1, 0, 1])).unwrap(), 8.0, max_relative = 1e-14);
        assert_eq!(u.scale(1.0), u);

        let w = u.scale(-8.0);
        assert!(w.factor(0, 0).iter().all(|&x| (x + 2.0).abs() < 1e-15));
        assert!(w.factor(0, 1).iter().all(|&x| (x - 2.0).abs() < 1e-15));
        assert_relative_eq!(w.entry(&MultiIndex(vec![0, 0, 0])).unwrap(), -8.0, max_relative = 1e-14);
        assert_eq!(w.rank(), 1);
    }

    #[test]
    fn add_concatenates() {
        let sh = s(&[2, 2]);
        let u = CpTensor::rank_one(&sh, &[vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let v = CpTensor::rank_one(&sh, &[vec![0.0, 1.0], vec![2.0, 0.0]]).unwrap();
        let w = u.add(&v).unwrap();
        assert_eq!(w.rank(), 2);
        assert_eq!(w.entry(&MultiIndex(vec![0, 0])).unwrap(), 1.0);
        assert_eq!(w.entry(&MultiIndex(vec![1, 0])).unwrap(), 2.0);
        assert_eq!(w.to_dense().unwrap().values(), &[1.0, 1.0, 2.0, 0.0]);
        assert_eq!(u.add(&CpTensor::zero(&sh)).unwrap(), u);
    }

    #[test]
    fn hadamard_of_rank_one_terms() {
        let sh = s(&[2, 2]);
        let u = CpTensor::rank_one(&sh, &[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let v = CpTensor::rank_one(&sh, &[vec![5.0, 6.0], vec![7.0, 8.0]]).unwrap();
        let w = u.hadamard(&v).unwrap();
        assert_eq!(w.rank(), 1);
        assert_eq!(w.factor(0, 0), &[5.0, 12.0]);
        assert_eq!(w.factor(0, 1), &[21.0, 32.0]);
    }

    #[test]
    fn oversized_products_are_refused() {
        let sh = s(&[1]);
        let w = CpTensor::new(sh, 20_000, vec![vec![1.0; 20_000]]).unwrap();
        assert!(matches!(w.hadamard(&w), Err(Error::StorageCapExceeded { .. })));
    }

    #[test]
    fn inner_of_rank_one_terms() {
        let sh = s(&[2, 2]);
        let u = CpTensor::unit(&sh);
        let v = CpTensor::rank_one(&sh, &[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(u.inner(&v).unwrap(), 21.0);
        assert_eq!(v.inner(&CpTensor::zero(&sh)).unwrap(), 0.0);
    }

    #[test]
    fn unit_properties() {
        let sh = s(&[2, 3]);
        let u = CpTensor::unit(&sh);
        assert_eq!(u.rank(), 1);
        assert!(u.to_dense().unwrap().values().iter().all(|&x| x == 1.0));
        assert_eq!(crate::algebra::state_functional(&u).unwrap(), 6.0);
        let uu = u.hadamard(&u).unwrap();
        assert_eq!(uu.to_dense().unwrap(), u.to_dense().unwrap());
    }

    #[test]
    fn entry_rejects_bad_index() {
        let u = CpTensor::unit(&s(&[2, 3]));
        assert!(u.entry(&MultiIndex(vec![2, 0])).is_err());
    }

    #[test]
    fn dense_round_trip_is_exact() {
        let sh = s(&[3, 2, 4]);
        let w = DenseTensor::from_function(sh, |m| {
            (m.0[0] as f64 - 1.3) * (m.0[1] as f64 + 0.7) - m.0[2] as f64 * 0.1
        })
        .unwrap();
        let cp = CpTensor::from_dense(&w).unwrap();
        assert_eq!(cp.to_dense().unwrap(), w);
    }

    #[test]
    fn merge_collapses_duplicates() {
        let sh = s(&[3, 2]);
        let a = vec![1.0, -2.0, 0.5];
        let b = vec![3.0, 1.0];
        let t = CpTensor::from_terms(sh, &[vec![a.clone(), b.clone()], vec![a, b]]).unwrap();
        let m = t.merge_parallel_terms();
        assert_eq!(m.rank(), 1);
        assert_eq!(m.to_dense().unwrap(), t.to_dense().unwrap());
    }

    #[test]
    fn balanced_keeps_values() {
        let sh = s(&[2, 2, 2]);
        let w = CpTensor::rank_one(&sh, &[vec![100.0, -3.0], vec![0.01, 0.02], vec![1.0, 2.0]]).unwrap();
        let b = w.balanced();
        let (x, y) = (w.to_dense().unwrap(), b.to_dense().unwrap());
        for (p, q) in x.values().iter().zip(y.values()) {
            assert_relative_eq!(p, q, max_relative = 1e-13);
        }
        let n0 = crate::dense::stable_norm(b.factor(0, 0));
        let n1 = crate::dense::stable_norm(b.factor(0, 1));
        assert_relative_eq!(n0, n1, max_relative = 1e-13);
    }

    #[test]
    fn peak_of_basis_vector() {
        let sh = s(&[3, 4, 2]);
        let m = MultiIndex(vec![2, 1, 1]);
        let e = CpTensor::basis(&sh, &m).unwrap();
        assert_eq!(e.locate_peak().unwrap(), m);
    }
}
