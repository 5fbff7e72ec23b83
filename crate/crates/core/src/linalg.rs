//! Thin helpers over `nalgebra` for the decompositions the backends need.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Thin SVD with singular values sorted in decreasing order.
pub(crate) struct SortedSvd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub vt: DMatrix<f64>,
}

/// Backed by `faer`: the `nalgebra` SVD can lose accuracy on rank-deficient
/// matrices with exactly zero singular values.
pub(crate) fn svd_sorted(m: DMatrix<f64>) -> Result<SortedSvd> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericalFailure("SVD input is not finite".into()));
    }
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return Ok(SortedSvd {
            u: DMatrix::zeros(rows, 0),
            s: Vec::new(),
            vt: DMatrix::zeros(0, cols),
        });
    }
    let a = faer::Mat::<f64>::from_fn(rows, cols, |i, j| m[(i, j)]);
    let svd = a
        .thin_svd()
        .map_err(|e| Error::NumericalFailure(format!("SVD did not converge: {e:?}")))?;
    let (u, v, s) = (svd.U(), svd.V(), svd.S().column_vector());
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).unwrap_or(std::cmp::Ordering::Equal));
    Ok(SortedSvd {
        u: DMatrix::from_fn(rows, k, |i, j| u[(i, order[j])]),
        s: order.iter().map(|&j| s[j]).collect(),
        vt: DMatrix::from_fn(k, cols, |i, j| v[(j, order[i])]),
    })
}

/// Solves `h x = rhs` for symmetric positive semi-definite `h`, falling back
/// to a truncated pseudo-inverse when Cholesky fails.
pub(crate) fn solve_spd(h: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(chol) = h.clone().cholesky() {
        let x = chol.solve(rhs);
        if x.iter().all(|v| v.is_finite()) {
            return Ok(x);
        }
    }
    let svd = svd_sorted(h.clone())?;
    let cut = svd.s.first().copied().unwrap_or(0.0) * 1e-13;
    let r = svd.s.iter().take_while(|&&s| s > cut).count();
    let mut x = svd.u.columns(0, r).transpose() * rhs;
    for (i, mut row) in x.row_iter_mut().enumerate() {
        row /= svd.s[i];
    }
    Ok(svd.vt.rows(0, r).transpose() * x)
}

/// `tail[k] = sqrt(sum_{j >= k} s_j^2)`, with `tail[len] = 0`.
pub(crate) fn tail_norms(s: &[f64]) -> Vec<f64> {
    let mut tail = vec![0.0; s.len() + 1];
    let mut acc = 0.0;
    for k in (0..s.len()).rev() {
        acc += s[k] * s[k];
        tail[k] = acc.sqrt();
    }
    tail
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svd_is_sorted_and_reconstructs() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 5.0, 0.0, 0.0]);
        let svd = svd_sorted(m.clone()).unwrap();
        assert!(svd.s[0] >= svd.s[1]);
        let rec = &svd.u * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(svd.s.clone())) * &svd.vt;
        assert!((rec - m).norm() < 1e-12);
    }

    #[test]
    fn rank_deficient_wide_matrix_reconstructs() {
        let m = DMatrix::from_row_slice(
            3,
            6,
            &[
                140.29611541307537, -1.0912335715547143e-5, 3.2246536790253043e-13, -4.475038766505547e-14,
                -9.534061627518865e-14, -1.901306670795454e-14, 140.29611541307256, -1.0912329290163389e-5,
                -1.874953158895543e-12, 1.3873350476253196e-12, -2.28785330704899e-13, -3.1890668786906054e-14,
                -140.2961154130696, 1.0912323198535848e-5, 3.7387129707240805e-12, -2.6512900332749566e-12,
                3.607845003381904e-13, 4.603110203048919e-14,
            ],
        );
        let svd = svd_sorted(m.clone()).unwrap();
        let rec = &svd.u * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(svd.s.clone())) * &svd.vt;
        assert!((rec - &m).norm() <= 1e-13 * m.norm());
    }

    #[test]
    fn tails() {
        let t = tail_norms(&[3.0, 4.0]);
        assert_eq!(t, vec![5.0, 4.0, 0.0]);
    }

    #[test]
    fn singular_solve_falls_back() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let rhs = DMatrix::from_row_slice(2, 1, &[2.0, 2.0]);
        let x = solve_spd(&h, &rhs).unwrap();
        assert!((&h * &x - rhs).norm() < 1e-10);
    }
}
