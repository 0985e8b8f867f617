//! Row spans: orthonormal bases, distances and unit normals.
//!
//! Bases are built by modified Gram-Schmidt with one full re-orthogonalization
//! pass per vector ("twice is enough").

use super::{dot, norm2, Matrix};
use crate::error::{Error, Result};

/// A row is treated as dependent when its residual is below this fraction of
/// its original norm.
const DEPENDENCE_TOL: f64 = 1e-10;

fn project_out(basis: &[Vec<f64>], u: &mut [f64]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, u);
            for (x, &qi) in u.iter_mut().zip(q) {
                *x -= c * qi;
            }
        }
    }
}

/// Orthonormal basis of the row span of `rows`.
pub fn orthonormal_basis(rows: &Matrix) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for i in 0..rows.nrows() {
        let r = rows.row(i);
        let scale = norm2(r);
        if scale == 0.0 {
            continue;
        }
        let mut u = r.to_vec();
        project_out(&basis, &mut u);
        let nu = norm2(&u);
        if nu > DEPENDENCE_TOL * scale {
            u.iter_mut().for_each(|x| *x /= nu);
            basis.push(u);
        }
    }
    basis
}

/// Euclidean distance from `r` to the span of the rows of `basis_rows`.
pub fn distance_to_span(r: &[f64], basis_rows: &Matrix) -> Result<f64> {
    if basis_rows.nrows() > 0 && basis_rows.ncols() != r.len() {
        return Err(Error::Dimension(format!(
            "vector length {} vs basis width {}",
            r.len(),
            basis_rows.ncols()
        )));
    }
    let basis = orthonormal_basis(basis_rows);
    let mut u = r.to_vec();
    project_out(&basis, &mut u);
    Ok(norm2(&u))
}

/// Unit vector orthogonal to the rows of an `(n-1) x n` basis whose span has
/// dimension exactly `n - 1`. The first coordinate that is not numerically zero
/// is made positive.
pub fn unit_normal(basis_rows: &Matrix) -> Result<Vec<f64>> {
    let n = basis_rows.ncols();
    if n == 0 {
        return Err(Error::Dimension("zero-width basis".into()));
    }
    let basis = orthonormal_basis(basis_rows);
    if basis.len() + 1 != n {
        return Err(Error::Corank {
            rank: basis.len(),
            expected: n - 1,
        });
    }
    // Start from the coordinate axis least covered by the span.
    let k = (0..n)
        .min_by(|&a, &b| {
            let ca: f64 = basis.iter().map(|q| q[a] * q[a]).sum();
            let cb: f64 = basis.iter().map(|q| q[b] * q[b]).sum();
            ca.total_cmp(&cb)
        })
        .expect("n > 0");
    let mut v = vec![0.0; n];
    v[k] = 1.0;
    project_out(&basis, &mut v);
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
    Ok(v)
}
