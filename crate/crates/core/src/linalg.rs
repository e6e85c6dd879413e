//! Dense decompositions backed by faer.

use faer::{Mat, Side};
use nalgebra::{DMatrix, DVector};

use crate::error::{Result, TnbsError};

fn to_faer(m: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn to_nalgebra(m: faer::MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Thin SVD `m = U diag(s) V^T` with `s` non-increasing. Returns `(U, s, V^T)`.
pub(crate) fn svd(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>, DMatrix<f64>)> {
    let f = to_faer(m);
    let svd = f
        .thin_svd()
        .map_err(|e| TnbsError::Numerical(format!("SVD did not converge: {e:?}")))?;
    let s: Vec<f64> = (0..svd.S().dim()).map(|i| svd.S()[i]).collect();
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
    let u = svd.U();
    let v = svd.V();
    let u = DMatrix::from_fn(u.nrows(), order.len(), |i, j| u[(i, order[j])]);
    let vt = DMatrix::from_fn(order.len(), v.nrows(), |i, j| v[(j, order[i])]);
    Ok((u, order.iter().map(|&i| s[i]).collect(), vt))
}

/// Eigenvalues and eigenvectors (as columns) of a symmetric matrix.
pub(crate) fn symmetric_eigen(m: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let f = to_faer(m);
    let eig = f
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| TnbsError::Numerical(format!("eigendecomposition did not converge: {e:?}")))?;
    let vals = DVector::from_fn(eig.S().dim(), |i, _| eig.S()[i]);
    Ok((vals, to_nalgebra(eig.U())))
}
