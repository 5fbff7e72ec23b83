//! Tensor-train (TT) format: `w(m) = G_1[m_1] G_2[m_2] ... G_d[m_d]`,
//! a product of matrices with `r_0 = r_d = 1`.
//!
//! Addition stacks cores block-diagonally, the Hadamard product takes
//! Kronecker products of core slices, and inner products contract from
//! left to right. [`round`] recompresses with quasi-optimal error control.

mod round;

pub use round::tt_round;

use nalgebra::DMatrix;

use crate::algebra::{check_storage, AlgebraElement, Truncated, TruncationPolicy};
use crate::cp::{pick_with_ties, CpTensor};
use crate::dense::{check_factors, checked_dense_len, DenseTensor};
use crate::error::{Error, Result};
use crate::linalg::{svd_sorted, tail_norms};
use crate::shape::{MultiIndex, Shape};

/// Third-order core `G(a, i, b)` of shape `r_left x n x r_right`.
#[derive(Debug, Clone, PartialEq)]
pub struct TtCore {
    r_left: usize,
    n: usize,
    r_right: usize,
    data: Vec<f64>,
}

impl TtCore {
    pub fn new(r_left: usize, n: usize, r_right: usize, data: Vec<f64>) -> Result<Self> {
        if r_left == 0 || n == 0 || r_right == 0 || data.len() != r_left * n * r_right {
            return Err(Error::InvalidParameter(format!(
                "core {r_left}x{n}x{r_right} cannot hold {} values",
                data.len()
            )));
        }
        Ok(Self { r_left, n, r_right, data })
    }

    pub fn zeros(r_left: usize, n: usize, r_right: usize) -> Self {
        Self {
            r_left,
            n,
            r_right,
            data: vec![0.0; r_left * n * r_right],
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.r_left, self.n, self.r_right)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, a: usize, i: usize, b: usize) -> f64 {
        self.data[(a * self.n + i) * self.r_right + b]
    }

    #[inline]
    fn at(&mut self, a: usize, i: usize, b: usize) -> &mut f64 {
        &mut self.data[(a * self.n + i) * self.r_right + b]
    }

    /// `(r_left n) x r_right` matrix.
    pub(crate) fn left_unfold(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.r_left * self.n, self.r_right, &self.data)
    }

    /// `r_left x (n r_right)` matrix.
    pub(crate) fn right_unfold(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.r_left, self.n * self.r_right, &self.data)
    }

    pub(crate) fn from_left_unfold(m: &DMatrix<f64>, n: usize) -> Self {
        let r_left = m.nrows() / n;
        let r_right = m.ncols();
        let mut data = Vec::with_capacity(m.len());
        for row in 0..m.nrows() {
            for col in 0..r_right {
                data.push(m[(row, col)]);
            }
        }
        Self { r_left, n, r_right, data }
    }

    pub(crate) fn from_right_unfold(m: &DMatrix<f64>, n: usize) -> Self {
        let r_left = m.nrows();
        let r_right = m.ncols() / n;
        let mut data = Vec::with_capacity(m.len());
        for row in 0..r_left {
            for col in 0..m.ncols() {
                data.push(m[(row, col)]);
            }
        }
        Self { r_left, n, r_right, data }
    }

    /// Slice `G(:, i, :)` applied to a row vector from the left.
    fn apply_left(&self, x: &[f64], i: usize) -> Vec<f64> {
        let mut y = vec![0.0; self.r_right];
        for (a, &xa) in x.iter().enumerate() {
            if xa == 0.0 {
                continue;
            }
            let row = &self.data[(a * self.n + i) * self.r_right..(a * self.n + i + 1) * self.r_right];
            for (yb, g) in y.iter_mut().zip(row) {
                *yb += xa * g;
            }
        }
        y
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TtTensor {
    shape: Shape,
    cores: Vec<TtCore>,
}

impl TtTensor {
    pub fn new(cores: Vec<TtCore>) -> Result<Self> {
        if cores.is_empty() {
            return Err(Error::InvalidParameter("a TT tensor needs at least one core".into()));
        }
        if cores[0].r_left != 1 || cores[cores.len() - 1].r_right != 1 {
            return Err(Error::InvalidParameter("boundary TT ranks must be 1".into()));
        }
        for pair in cores.windows(2) {
            if pair[0].r_right != pair[1].r_left {
                return Err(Error::InvalidParameter(format!(
                    "adjacent cores disagree on rank: {} vs {}",
                    pair[0].r_right, pair[1].r_left
                )));
            }
        }
        let shape = Shape::new(cores.iter().map(|c| c.n).collect())?;
        Ok(Self { shape, cores })
    }

    pub fn cores(&self) -> &[TtCore] {
        &self.cores
    }

    pub fn order(&self) -> usize {
        self.cores.len()
    }

    /// `r_0, ..., r_d`.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r: Vec<usize> = self.cores.iter().map(|c| c.r_left).collect();
        r.push(1);
        r
    }

    /// Number of stored values.
    pub fn storage(&self) -> usize {
        self.cores.iter().map(|c| c.data.len()).sum()
    }

    /// Diagonal embedding of a CP tensor; TT ranks equal the CP rank.
    pub fn from_cp(cp: &CpTensor) -> Self {
        let shape = cp.shape().clone();
        let r = cp.rank();
        if r == 0 {
            return Self::zero(&shape);
        }
        let d = shape.order();
        let cores = (0..d)
            .map(|nu| {
                let n = shape.mode_size(nu);
                let (rl, rr) = (if nu == 0 { 1 } else { r }, if nu == d - 1 { 1 } else { r });
                let mut core = TtCore::zeros(rl, n, rr);
                for t in 0..r {
                    let f = cp.factor(t, nu);
                    let (a, b) = (if rl == 1 { 0 } else { t }, if rr == 1 { 0 } else { t });
                    // For d = 1 every term lands on the same 1 x n x 1 core.
                    for (i, &x) in f.iter().enumerate() {
                        *core.at(a, i, b) += x;
                    }
                }
                core
            })
            .collect();
        Self { shape, cores }
    }

    /// CP to TT for large CP ranks: converts `chunk` terms at a time and
    /// rounds the running sum to relative accuracy `epsilon`.
    pub fn from_cp_rounded(cp: &CpTensor, epsilon: f64, chunk: usize) -> Result<Self> {
        let chunk = chunk.max(1);
        let policy = TruncationPolicy::new(epsilon, 1)?;
        let mut acc: Option<Self> = None;
        let mut start = 0;
        while start < cp.rank() {
            let end = (start + chunk).min(cp.rank());
            let terms: Vec<Vec<Vec<f64>>> = (start..end).map(|i| cp.term(i)).collect();
            let part = Self::from_cp(&CpTensor::from_terms(cp.shape().clone(), &terms)?);
            let sum = match acc {
                Some(a) => a.add(&part)?,
                None => part,
            };
            acc = Some(tt_round(&sum, &policy)?.value);
            start = end;
        }
        Ok(acc.unwrap_or_else(|| Self::zero(cp.shape())))
    }

    /// TT-SVD of a full tensor with relative accuracy `epsilon`.
    pub fn from_dense(w: &DenseTensor, epsilon: f64) -> Result<Self> {
        let shape = w.shape().clone();
        let d = shape.order();
        let total = crate::dense::stable_norm(w.values());
        let delta = if d > 1 { epsilon * total / ((d - 1) as f64).sqrt() } else { 0.0 };
        let mut cores = Vec::with_capacity(d);
        let mut rest = w.values().to_vec();
        let mut r_prev = 1;
        for nu in 0..d - 1 {
            let n = shape.mode_size(nu);
            let rows = r_prev * n;
            let cols = rest.len() / rows;
            let svd = svd_sorted(DMatrix::from_row_slice(rows, cols, &rest))?;
            let tails = tail_norms(&svd.s);
            let r = (1..=svd.s.len()).find(|&k| tails[k] <= delta).unwrap_or(svd.s.len());
            let u = svd.u.columns(0, r).into_owned();
            cores.push(TtCore::from_left_unfold(&u, n));
            let sv = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&svd.s[..r]))
                * svd.vt.rows(0, r);
            rest = Vec::with_capacity(sv.len());
            for row in 0..sv.nrows() {
                for col in 0..sv.ncols() {
                    rest.push(sv[(row, col)]);
                }
            }
            r_prev = r;
        }
        cores.push(TtCore::new(r_prev, shape.mode_size(d - 1), 1, rest)?);
        Self::new(cores)
    }

    pub fn to_dense(&self) -> Result<DenseTensor> {
        checked_dense_len(&self.shape)?;
        // Sweep left to right, keeping every partial row vector.
        let mut rows: Vec<Vec<f64>> = vec![vec![1.0]];
        for core in &self.cores {
            let mut next = Vec::with_capacity(rows.len() * core.n);
            for x in &rows {
                for i in 0..core.n {
                    next.push(core.apply_left(x, i));
                }
            }
            rows = next;
        }
        DenseTensor::from_vec(self.shape.clone(), rows.into_iter().map(|v| v[0]).collect())
    }

    /// Equivalent tensor whose cores `2..d` are right-orthonormal,
    /// `sum_{i,b} G(a,i,b) G(a',i,b) = delta_{a a'}`. All weight ends up in
    /// the first core.
    pub fn right_orthogonalize(&self) -> Self {
        let mut cores = self.cores.clone();
        for k in (1..cores.len()).rev() {
            let n = cores[k].n;
            let qr = cores[k].right_unfold().transpose().qr();
            let q = qr.q();
            let r = qr.r();
            cores[k] = TtCore::from_right_unfold(&q.transpose(), n);
            let nk = cores[k - 1].n;
            let m = cores[k - 1].left_unfold() * r.transpose();
            cores[k - 1] = TtCore::from_left_unfold(&m, nk);
        }
        Self {
            shape: self.shape.clone(),
            cores,
        }
    }

    /// Euclidean norm through a left-to-right QR sweep. Unlike `sqrt(<w,w>)`
    /// this does not square the condition of the computation, which keeps
    /// small differences measurable.
    pub fn orthogonal_norm(&self) -> f64 {
        let mut r = DMatrix::from_element(1, 1, 1.0);
        let mut exponent = 0i32;
        for core in &self.cores {
            let n = core.n;
            let m = &r * core.right_unfold();
            let stacked = TtCore::from_right_unfold(&m, n).left_unfold();
            let qr = stacked.qr();
            r = qr.r();
            let scale = r.amax();
            if scale == 0.0 || !scale.is_finite() {
                return if scale == 0.0 { 0.0 } else { f64::NAN };
            }
            let k = scale.log2().floor() as i32;
            r *= 2f64.powi(-k);
            exponent += k;
        }
        ldexp(r.norm(), exponent)
    }

    /// Evens out the core magnitudes by exact powers of two.
    ///
    /// Repeated products and scalings otherwise pile the whole magnitude
    /// onto a few cores, which then under- or overflow although the tensor
    /// itself is representable.
    pub(crate) fn rebalance(&mut self) {
        let exps: Vec<i32> = self
            .cores
            .iter()
            .map(|c| c.data.iter().fold(0.0f64, |m, x| m.max(x.abs())))
            .map(|m| if m > 0.0 && m.is_finite() { m.log2().floor() as i32 } else { i32::MIN })
            .collect();
        if exps.iter().any(|&e| e == i32::MIN) {
            return;
        }
        let (lo, hi) = (*exps.iter().min().unwrap(), *exps.iter().max().unwrap());
        if hi - lo <= 64 {
            return;
        }
        let d = exps.len() as i64;
        let total: i64 = exps.iter().map(|&e| e as i64).sum();
        let target = total.div_euclid(d) as i32;
        let spare = total.rem_euclid(d) as usize;
        for (k, (core, &e)) in self.cores.iter_mut().zip(&exps).enumerate() {
            let shift = target - e + i32::from(k < spare);
            core.data.iter_mut().for_each(|x| *x = ldexp(*x, shift));
        }
    }

    /// Per-step environment contraction `E' = sum_i A_i^T E B_i`.
    fn contract_step(e: &[f64], a: &TtCore, b: &TtCore) -> Vec<f64> {
        let (ra, rb) = (a.r_left, b.r_left);
        let (sa, sb) = (a.r_right, b.r_right);
        let mut out = vec![0.0; sa * sb];
        // tmp[a2][i][b1] = sum_a1 E[a1][a2] A[a1][i][b1]
        let mut tmp = vec![0.0; rb * a.n * sa];
        for a1 in 0..ra {
            for a2 in 0..rb {
                let eij = e[a1 * rb + a2];
                if eij == 0.0 {
                    continue;
                }
                for i in 0..a.n {
                    let src = &a.data[(a1 * a.n + i) * sa..(a1 * a.n + i + 1) * sa];
                    let dst = &mut tmp[(a2 * a.n + i) * sa..(a2 * a.n + i + 1) * sa];
                    for (t, s) in dst.iter_mut().zip(src) {
                        *t += eij * s;
                    }
                }
            }
        }
        for a2 in 0..rb {
            for i in 0..a.n {
                let trow = &tmp[(a2 * a.n + i) * sa..(a2 * a.n + i + 1) * sa];
                let brow = &b.data[(a2 * b.n + i) * sb..(a2 * b.n + i + 1) * sb];
                for (b1, &t) in trow.iter().enumerate() {
                    if t == 0.0 {
                        continue;
                    }
                    let orow = &mut out[b1 * sb..(b1 + 1) * sb];
                    for (o, &bv) in orow.iter_mut().zip(brow) {
                        *o += t * bv;
                    }
                }
            }
        }
        out
    }

    /// Right environments `R_k = <cores k.., cores k..>` normalised to unit
    /// max entry; `R_d = [1]`.
    fn right_environments(&self) -> Vec<Vec<f64>> {
        let d = self.order();
        let mut env = vec![Vec::new(); d + 1];
        env[d] = vec![1.0];
        for k in (0..d).rev() {
            let c = &self.cores[k];
            let (rl, n, rr) = c.dims();
            let right = &env[k + 1];
            let mut out = vec![0.0; rl * rl];
            for a in 0..rl {
                for a2 in a..rl {
                    let mut s = 0.0;
                    for i in 0..n {
                        for b in 0..rr {
                            let ga = c.get(a, i, b);
                            if ga == 0.0 {
                                continue;
                            }
                            for b2 in 0..rr {
                                s += ga * right[b * rr + b2] * c.get(a2, i, b2);
                            }
                        }
                    }
                    out[a * rl + a2] = s;
                    out[a2 * rl + a] = s;
                }
            }
            let scale = out.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if scale > 0.0 {
                out.iter_mut().for_each(|x| *x /= scale);
            }
            env[k] = out;
        }
        env
    }
}

/// `x * 2^k` without overflowing intermediate powers.
pub(crate) fn ldexp(mut x: f64, mut k: i32) -> f64 {
    while k > 1000 {
        x *= 2f64.powi(1000);
        k -= 1000;
    }
    while k < -1000 {
        x *= 2f64.powi(-1000);
        k += 1000;
    }
    x * 2f64.powi(k)
}

impl AlgebraElement for TtTensor {
    fn shape(&self) -> &Shape {
        &self.shape
    }

    fn rank_one(shape: &Shape, factors: &[Vec<f64>]) -> Result<Self> {
        check_factors(shape, factors)?;
        let cores = factors
            .iter()
            .map(|f| TtCore::new(1, f.len(), 1, f.clone()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(cores)
    }

    fn zero(shape: &Shape) -> Self {
        let cores = shape.mode_sizes().iter().map(|&n| TtCore::zeros(1, n, 1)).collect();
        Self {
            shape: shape.clone(),
            cores,
        }
    }

    fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let d = self.order();
        if d == 1 {
            let data = self.cores[0].data.iter().zip(&other.cores[0].data).map(|(a, b)| a + b).collect();
            return Self::new(vec![TtCore::new(1, self.cores[0].n, 1, data)?]);
        }
        let cores = (0..d)
            .map(|k| {
                let (a, b) = (&self.cores[k], &other.cores[k]);
                let n = a.n;
                let rl = if k == 0 { 1 } else { a.r_left + b.r_left };
                let rr = if k == d - 1 { 1 } else { a.r_right + b.r_right };
                let mut c = TtCore::zeros(rl, n, rr);
                let (off_l, off_r) = (if k == 0 { 0 } else { a.r_left }, if k == d - 1 { 0 } else { a.r_right });
                for x in 0..a.r_left {
                    for i in 0..n {
                        for y in 0..a.r_right {
                            *c.at(x, i, y) = a.get(x, i, y);
                        }
                    }
                }
                for x in 0..b.r_left {
                    for i in 0..n {
                        for y in 0..b.r_right {
                            *c.at(off_l + x, i, off_r + y) = b.get(x, i, y);
                        }
                    }
                }
                c
            })
            .collect();
        Ok(Self {
            shape: self.shape.clone(),
            cores,
        })
    }

    fn scale(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.cores[0].data.iter_mut().for_each(|x| *x *= alpha);
        out.rebalance();
        out
    }

    fn hadamard(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let values = self.cores.iter().zip(&other.cores).try_fold(0usize, |acc, (a, b)| {
            (a.r_left * a.r_right)
                .checked_mul(b.r_left * b.r_right)
                .and_then(|r| r.checked_mul(a.n))
                .and_then(|v| acc.checked_add(v))
        });
        check_storage(values)?;
        let cores = self
            .cores
            .iter()
            .zip(&other.cores)
            .map(|(a, b)| {
                let (rl, rr) = (a.r_left * b.r_left, a.r_right * b.r_right);
                let mut c = TtCore::zeros(rl, a.n, rr);
                for a1 in 0..a.r_left {
                    for a2 in 0..b.r_left {
                        for i in 0..a.n {
                            for b1 in 0..a.r_right {
                                let x = a.get(a1, i, b1);
                                for b2 in 0..b.r_right {
                                    *c.at(a1 * b.r_left + a2, i, b1 * b.r_right + b2) = x * b.get(a2, i, b2);
                                }
                            }
                        }
                    }
                }
                c
            })
            .collect();
        let mut out = Self {
            shape: self.shape.clone(),
            cores,
        };
        out.rebalance();
        Ok(out)
    }

    fn inner(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other)?;
        // Rescale by powers of two so the bookkeeping itself is exact.
        let mut e = vec![1.0];
        let mut exponent = 0i32;
        for (a, b) in self.cores.iter().zip(&other.cores) {
            e = Self::contract_step(&e, a, b);
            let s = e.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if s == 0.0 {
                return Ok(0.0);
            }
            if !s.is_finite() {
                return Err(Error::NumericalFailure("TT inner product overflowed".into()));
            }
            let k = s.log2().floor() as i32;
            let factor = 2f64.powi(-k);
            e.iter_mut().for_each(|x| *x *= factor);
            exponent += k;
        }
        Ok(ldexp(e[0], exponent))
    }

    fn norm(&self) -> f64 {
        self.orthogonal_norm()
    }

    fn entry(&self, index: &MultiIndex) -> Result<f64> {
        self.shape.check_index(index)?;
        let mut x = vec![1.0];
        for (core, &i) in self.cores.iter().zip(index.as_slice()) {
            x = core.apply_left(&x, i);
        }
        Ok(x[0])
    }

    fn rank(&self) -> usize {
        self.ranks().into_iter().max().unwrap_or(1)
    }

    fn truncate(&self, policy: &TruncationPolicy) -> Result<Truncated<Self>> {
        tt_round(self, policy)
    }

    /// Greedy mode-by-mode choice of the position with the largest
    /// marginal energy, using right Gram environments.
    fn locate_peak(&self) -> Result<MultiIndex> {
        let env = self.right_environments();
        if env[0].iter().all(|&x| x == 0.0) {
            return Err(Error::DegenerateIterate("cannot locate the peak of zero".into()));
        }
        let mut x = vec![1.0];
        let mut chosen = Vec::with_capacity(self.order());
        for (k, core) in self.cores.iter().enumerate() {
            let right = &env[k + 1];
            let rr = core.r_right;
            let candidates: Vec<Vec<f64>> = (0..core.n).map(|i| core.apply_left(&x, i)).collect();
            let scores: Vec<f64> = candidates
                .iter()
                .map(|y| {
                    let mut s = 0.0;
                    for b in 0..rr {
                        for b2 in 0..rr {
                            s += y[b] * right[b * rr + b2] * y[b2];
                        }
                    }
                    s
                })
                .collect();
            let best = pick_with_ties(&scores);
            chosen.push(best);
            x = candidates.into_iter().nth(best).expect("best is in range");
            let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if scale > 0.0 {
                x.iter_mut().for_each(|v| *v /= scale);
            }
        }
        Ok(MultiIndex(chosen))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tt(shape: &Shape, r: usize, seed: u64) -> TtTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = shape.order();
        let cores = (0..d)
            .map(|k| {
                let (rl, rr) = (if k == 0 { 1 } else { r }, if k == d - 1 { 1 } else { r });
                let n = shape.mode_size(k);
                TtCore::new(rl, n, rr, (0..rl * n * rr).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
            })
            .collect();
        TtTensor::new(cores).unwrap()
    }

    fn dense_inner(a: &DenseTensor, b: &DenseTensor) -> f64 {
        a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn rejects_inconsistent_ranks() {
        let a = TtCore::zeros(1, 2, 2);
        let b = TtCore::zeros(3, 2, 1);
        assert!(TtTensor::new(vec![a, b]).is_err());
        assert!(TtTensor::new(vec![TtCore::zeros(2, 2, 1)]).is_err());
    }

    #[test]
    fn operations_match_dense() {
        let shape = Shape::new(vec![3, 4, 2, 3]).unwrap();
        let u = random_tt(&shape, 2, 1);
        let v = random_tt(&shape, 3, 2);
        let (du, dv) = (u.to_dense().unwrap(), v.to_dense().unwrap());

        let sum = u.add(&v).unwrap();
        assert_eq!(sum.ranks(), vec![1, 5, 5, 5, 1]);
        let prod = u.hadamard(&v).unwrap();
        assert_eq!(prod.ranks(), vec![1, 6, 6, 6, 1]);
        let (ds, dp) = (sum.to_dense().unwrap(), prod.to_dense().unwrap());
        for k in 0..du.len() {
            let (a, b) = (du.values()[k], dv.values()[k]);
            assert_relative_eq!(ds.values()[k], a + b, epsilon = 1e-12);
            assert_relative_eq!(dp.values()[k], a * b, epsilon = 1e-12);
        }
        assert_relative_eq!(u.inner(&v).unwrap(), dense_inner(&du, &dv), max_relative = 1e-12);
        assert_relative_eq!(u.norm(), dense_inner(&du, &du).sqrt(), max_relative = 1e-12);
        let m = MultiIndex(vec![2, 1, 0, 2]);
        assert_relative_eq!(u.entry(&m).unwrap(), du.values()[shape.linear_index(&m).unwrap()]);
        assert_relative_eq!(u.scale(-2.5).entry(&m).unwrap(), -2.5 * u.entry(&m).unwrap());
    }

    #[test]
    fn from_cp_matches() {
        let shape = Shape::new(vec![3, 2, 4]).unwrap();
        let cp = CpTensor::from_terms(
            shape.clone(),
            &[
                vec![vec![1.0, 2.0, 3.0], vec![1.0, -1.0], vec![0.5, 0.0, 1.0, 2.0]],
                vec![vec![0.0, 1.0, 0.0], vec![2.0, 2.0], vec![1.0, 1.0, 1.0, -1.0]],
            ],
        )
        .unwrap();
        let tt = TtTensor::from_cp(&cp);
        assert_eq!(tt.ranks(), vec![1, 2, 2, 1]);
        let (a, b) = (tt.to_dense().unwrap(), cp.to_dense().unwrap());
        for (x, y) in a.values().iter().zip(b.values()) {
            assert_relative_eq!(x, y, epsilon = 1e-14);
        }
        let rounded = TtTensor::from_cp_rounded(&cp, 1e-13, 1).unwrap();
        for (x, y) in rounded.to_dense().unwrap().values().iter().zip(b.values()) {
            assert_relative_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn dense_round_trip() {
        let shape = Shape::new(vec![4, 3, 5]).unwrap();
        let w = DenseTensor::from_function(shape, |m| {
            1.0 / (1.0 + m.0[0] as f64 + 2.0 * m.0[1] as f64 + 0.5 * m.0[2] as f64)
        })
        .unwrap();
        let tt = TtTensor::from_dense(&w, 0.0).unwrap();
        for (x, y) in tt.to_dense().unwrap().values().iter().zip(w.values()) {
            assert_relative_eq!(x, y, epsilon = 1e-13);
        }
    }

    #[test]
    fn unit_and_zero() {
        let shape = Shape::new(vec![2, 3, 4]).unwrap();
        let u = TtTensor::unit(&shape);
        assert_eq!(crate::algebra::state_functional(&u).unwrap(), 24.0);
        let z = TtTensor::zero(&shape);
        assert_eq!(z.norm(), 0.0);
        assert_eq!(u.inner(&z).unwrap(), 0.0);
        assert_eq!(u.add(&z).unwrap().to_dense().unwrap(), u.to_dense().unwrap());
    }

    #[test]
    fn inner_survives_extreme_order() {
        // N = 100^150 = 1e300; <1, 1> = N stays representable only if the
        // contraction is rescaled on the way.
        let shape = Shape::uniform(100, 150).unwrap();
        let u = TtTensor::unit(&shape);
        assert_relative_eq!(u.inner(&u).unwrap(), 1e300, max_relative = 1e-12);
        let h = TtTensor::normalized_unit(&shape);
        assert_relative_eq!(h.norm(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn right_orthogonal_cores() {
        let shape = Shape::new(vec![3, 4, 3, 2]).unwrap();
        let w = random_tt(&shape, 3, 7);
        let o = w.right_orthogonalize();
        for core in &o.cores()[1..] {
            let m = core.right_unfold();
            let g = &m * m.transpose();
            assert!((g - DMatrix::identity(m.nrows(), m.nrows())).norm() < 1e-12);
        }
        for (x, y) in o.to_dense().unwrap().values().iter().zip(w.to_dense().unwrap().values()) {
            assert_relative_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn order_one_from_cp_sums_terms() {
        let shape = Shape::new(vec![3]).unwrap();
        let cp = CpTensor::from_terms(shape, &[vec![vec![1.0, 2.0, 3.0]], vec![vec![0.5, -1.0, 0.0]]]).unwrap();
        let tt = TtTensor::from_cp(&cp);
        assert_eq!(tt.to_dense().unwrap().values(), &[1.5, 1.0, 3.0]);
    }

    #[test]
    fn distance_resolves_tiny_differences() {
        let shape = Shape::uniform(5, 4).unwrap();
        let w = random_tt(&shape, 2, 3);
        let e = TtTensor::basis(&shape, &MultiIndex(vec![1, 2, 3, 4])).unwrap();
        let v = w.add(&e.scale(1e-11)).unwrap();
        assert_relative_eq!(w.distance(&v).unwrap(), 1e-11, max_relative = 1e-3);
    }

    #[test]
    fn peak_of_spiky_tensor() {
        let shape = Shape::uniform(6, 5).unwrap();
        let m = MultiIndex(vec![5, 0, 3, 2, 4]);
        let e = TtTensor::basis(&shape, &m).unwrap();
        let noise = random_tt(&shape, 2, 11).scale(1e-4);
        let w = e.add(&noise).unwrap();
        assert_eq!(w.locate_peak().unwrap(), m);
    }

    #[test]
    fn repeated_squaring_keeps_magnitudes_representable() {
        // Entries of v are 1e-50; squaring without rebalancing would
        // drive the first core below the smallest double.
        let shape = Shape::uniform(100, 50).unwrap();
        let mut v = TtTensor::normalized_unit(&shape);
        for _ in 0..10 {
            let u = v.hadamard(&v).unwrap();
            let n = u.norm();
            assert!(n.is_finite() && n > 0.0);
            v = u.scale(1.0 / n);
            assert_relative_eq!(v.norm(), 1.0, max_relative = 1e-12);
        }
        let m = MultiIndex(vec![7; 50]);
        assert_relative_eq!(v.entry(&m).unwrap(), 1e-50, max_relative = 1e-10);
    }
}
