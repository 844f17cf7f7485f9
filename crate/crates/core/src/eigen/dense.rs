//! Dense generalized symmetric eigensolver, used as the in-repo oracle and for small fiber pencils.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub const DENSE_LIMIT: usize = 2500;

/// Flip each column so its largest-magnitude entry is positive.
pub(crate) fn fix_signs(v: &mut DMatrix<f64>) {
    for mut col in v.column_iter_mut() {
        let mut best = 0.0f64;
        for &x in col.iter() {
            if x.abs() > best.abs() * (1.0 + 1e-10) {
                best = x;
            }
        }
        if best < 0.0 {
            col.neg_mut();
        }
    }
}

/// Lowest `k` eigenpairs of A v = λ M v with M-orthonormal eigenvectors.
pub fn generalized_lowest(a: &DMatrix<f64>, m: &DMatrix<f64>, k: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    if a.ncols() != n || m.shape() != (n, n) {
        return Err(Error::Shape(format!("pencil shapes {:?} and {:?}", a.shape(), m.shape())));
    }
    if k > n {
        return Err(Error::Validation(format!("{k} eigenpairs requested from a {n}×{n} pencil")));
    }
    let chol = Cholesky::new(m.clone()).ok_or_else(|| Error::Assembly("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    let la = l.solve_lower_triangular(a).expect("triangular solve");
    let c = l.solve_lower_triangular(&la.transpose()).expect("triangular solve");
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let order = &order[..k];
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let y = DMatrix::from_fn(n, k, |r, c| eig.eigenvectors[(r, order[c])]);
    let mut v = l.transpose().solve_upper_triangular(&y).expect("triangular solve");
    fix_signs(&mut v);
    Ok((vals, v))
}
