//! Small dense linear-algebra helpers.
//!
//! Hot loops (UCB evaluation, rank-one updates) work on row-major `&[f64]`
//! slices; decompositions go through `nalgebra`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative rank tolerance: an eigenvalue counts as nonzero if it exceeds
/// `RANK_RTOL * max(1, lambda_max)`.
pub const RANK_RTOL: f64 = 1e-9;

/// Absolute symmetry tolerance (scaled by `max(1, max|m_ij|)`).
pub const SYMMETRY_TOL: f64 = 1e-12;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `out = M v` for a row-major `d x d` matrix.
#[inline]
pub fn mat_vec_into(m: &[f64], v: &[f64], out: &mut [f64]) {
    let d = v.len();
    for (i, o) in out.iter_mut().enumerate().take(d) {
        *o = dot(&m[i * d..(i + 1) * d], v);
    }
}

/// `v^T M v` for a row-major `d x d` matrix.
#[inline]
pub fn quad_form(m: &[f64], v: &[f64]) -> f64 {
    let d = v.len();
    let mut s = 0.0;
    for i in 0..d {
        if v[i] == 0.0 {
            continue;
        }
        s += v[i] * dot(&m[i * d..(i + 1) * d], v);
    }
    s
}

pub fn to_dmatrix(m: &[f64], d: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(d, d, m)
}

pub fn from_dmatrix(m: &DMatrix<f64>) -> Vec<f64> {
    let d = m.nrows();
    let mut out = vec![0.0; d * m.ncols()];
    for i in 0..d {
        for j in 0..m.ncols() {
            out[i * m.ncols() + j] = m[(i, j)];
        }
    }
    out
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = m.iter().fold(1.0f64, |acc, x| acc.max(x.abs()));
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[(i, j)] - m[(j, i)]).abs() > tol * scale {
                return false;
            }
        }
    }
    true
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted ascending.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, in the same order as `values`.
    pub vectors: DMatrix<f64>,
}

pub fn sym_eigen(m: &DMatrix<f64>) -> SymEigen {
    let n = m.nrows();
    if n == 0 {
        return SymEigen {
            values: Vec::new(),
            vectors: DMatrix::zeros(0, 0),
        };
    }
    // symmetrize to kill round-off asymmetry before handing to the solver
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }
    SymEigen { values, vectors }
}

pub fn rank_threshold(lambda_max: f64) -> f64 {
    RANK_RTOL * lambda_max.max(1.0)
}

/// Smallest eigenvalue strictly above `tol * lambda_max` of a symmetric p.s.d.
/// matrix; zero for the zero matrix.
pub fn min_nonzero_eig(m: &DMatrix<f64>, tol: f64) -> Result<f64> {
    if !is_symmetric(m, SYMMETRY_TOL) {
        return Err(Error::arg("matrix is not symmetric"));
    }
    let eig = sym_eigen(m);
    let lambda_max = eig.values.last().copied().unwrap_or(0.0);
    if lambda_max <= 0.0 {
        return Ok(0.0);
    }
    let cut = tol * lambda_max;
    Ok(eig
        .values
        .iter()
        .copied()
        .find(|&v| v > cut)
        .unwrap_or(0.0))
}

/// Natural log of the determinant of a symmetric positive-definite matrix.
pub fn log_det_spd(m: &DMatrix<f64>) -> Option<f64> {
    let chol = m.clone().cholesky()?;
    let l = chol.l_dirty();
    Some((0..m.nrows()).map(|i| 2.0 * l[(i, i)].ln()).sum())
}

/// Inverse of a symmetric positive-definite matrix via Cholesky.
pub fn inverse_spd(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    Some(m.clone().cholesky()?.inverse())
}

/// Spectral norm of a symmetric matrix (largest absolute eigenvalue).
pub fn spectral_norm_sym(m: &DMatrix<f64>) -> f64 {
    let eig = sym_eigen(m);
    eig.values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

pub fn dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_nonzero_eig_diagonal() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 3.0, 5.0]));
        assert!((min_nonzero_eig(&m, 1e-9).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn min_nonzero_eig_rank_one() {
        let v = DVector::from_vec(vec![0.0, 2.0 / 2f64.sqrt(), 2.0 / 2f64.sqrt()]);
        let m = &v * v.transpose();
        assert!((min_nonzero_eig(&m, 1e-9).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn min_nonzero_eig_zero_matrix() {
        let m = DMatrix::zeros(4, 4);
        assert_eq!(min_nonzero_eig(&m, 1e-9).unwrap(), 0.0);
    }

    #[test]
    fn min_nonzero_eig_rejects_asymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(min_nonzero_eig(&m, 1e-9), Err(Error::Argument(_))));
    }

    #[test]
    fn quad_form_matches_explicit() {
        let m = [2.0, 1.0, 1.0, 3.0];
        let v = [1.0, -2.0];
        // 2*1 + 2*1*(-2)*1 + 3*4 = 2 - 4 + 12
        assert_eq!(quad_form(&m, &v), 10.0);
    }
}
