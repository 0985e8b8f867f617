//! One-sided (Hestenes) Jacobi SVD.
//!
//! The rows of an `m x n` matrix (`m <= n`) are rotated pairwise until they are
//! mutually orthogonal; the row norms are then the singular values. The product
//! of the applied rotations is accumulated in `rotation` so that
//! `rotation * A` has orthogonal rows.

use serde::{Deserialize, Serialize};

use super::{dot, Matrix};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 80;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    /// Descending.
    pub singular_values: Vec<f64>,
    pub smallest: f64,
    pub largest: f64,
    pub hs_norm: f64,
}

#[derive(Debug, Clone)]
pub struct JacobiSvd {
    /// Descending.
    pub values: Vec<f64>,
    /// Accumulated orthogonal transform (`k x k`, `k = min(m, n)` rows processed).
    pub rotation: Matrix,
    pub sweeps: usize,
}

impl JacobiSvd {
    /// `max |Q Q^T - I|` of the accumulated rotation.
    pub fn orthogonality_residual(&self) -> f64 {
        let q = &self.rotation;
        let k = q.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..k {
            for j in 0..k {
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot(q.row(i), q.row(j)) - want).abs());
            }
        }
        worst
    }
}

/// Full Jacobi decomposition of `a`. Tall inputs are transposed first, which
/// leaves the singular values unchanged.
pub fn jacobi_svd(a: &Matrix) -> Result<JacobiSvd> {
    if !a.is_finite() {
        return Err(Error::NonFinite);
    }
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::Dimension("empty matrix".into()));
    }
    let mut x = if a.nrows() <= a.ncols() {
        a.clone()
    } else {
        a.transpose()
    };
    let k = x.nrows();
    let len = x.ncols();
    let mut q = Matrix::identity(k);
    let mut sweeps = 0;
    let tol = f64::EPSILON * (len as f64).sqrt();

    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut rotated = false;
        for p in 0..k {
            for r in p + 1..k {
                let (alpha, beta, gamma) = {
                    let xp = x.row(p);
                    let xr = x.row(r);
                    (dot(xp, xp), dot(xr, xr), dot(xp, xr))
                };
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_rows(&mut x, p, r, len, c, s);
                rotate_rows(&mut q, p, r, k, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut values: Vec<f64> = (0..k).map(|i| dot(x.row(i), x.row(i)).sqrt()).collect();
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(JacobiSvd {
        values,
        rotation: q,
        sweeps,
    })
}

fn rotate_rows(m: &mut Matrix, p: usize, r: usize, len: usize, c: f64, s: f64) {
    for j in 0..len {
        let a = m.get(p, j);
        let b = m.get(r, j);
        m.set(p, j, c * a - s * b);
        m.set(r, j, s * a + c * b);
    }
}

/// Singular spectrum of `a`, descending, with the Hilbert-Schmidt norm.
pub fn singular_values(a: &Matrix) -> Result<SpectralSummary> {
    let svd = jacobi_svd(a)?;
    let hs_norm = a.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(SpectralSummary {
        smallest: *svd.values.last().expect("nonempty"),
        largest: svd.values[0],
        singular_values: svd.values,
        hs_norm,
    })
}
