//! Dense helpers for the small eigenvalue problems behind the coercivity,
//! continuity and trace constants.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Orthonormal basis (columns) of the null space of `b` (m × n).
pub fn null_space(b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = b.ncols();
    if b.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    let btb = b.transpose() * b;
    let eig = SymmetricEigen::new(btb);
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cut = top.max(f64::MIN_POSITIVE) * 1e-11;
    let cols: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i].abs() <= cut).collect();
    DMatrix::from_fn(n, cols.len(), |i, k| eig.eigenvectors[(i, cols[k])])
}

/// Eigenvalues of the symmetric pencil (a, m) with `m` positive definite,
/// sorted ascending.
pub fn generalized_eigenvalues(a: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let sym_m = (m + m.transpose()) * 0.5;
    let chol = sym_m
        .cholesky()
        .ok_or_else(|| Error::Solver("norm matrix is not positive definite".into()))?;
    let l = chol.l();
    let l_inv = l
        .clone()
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .ok_or_else(|| Error::Solver("triangular solve failed".into()))?;
    let sym_a = (a + a.transpose()) * 0.5;
    let c = &l_inv * sym_a * l_inv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(c).eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(ev)
}

/// Extreme eigenvalues of the pencil (a, m) restricted to the span of the
/// columns of `z`.
pub fn restricted_extremes(a: &DMatrix<f64>, m: &DMatrix<f64>, z: &DMatrix<f64>) -> Result<(f64, f64)> {
    let ar = z.transpose() * a * z;
    let mr = z.transpose() * m * z;
    let ev = generalized_eigenvalues(&ar, &mr)?;
    match (ev.first(), ev.last()) {
        (Some(&lo), Some(&hi)) => Ok((lo, hi)),
        _ => Err(Error::Solver("empty subspace".into())),
    }
}
