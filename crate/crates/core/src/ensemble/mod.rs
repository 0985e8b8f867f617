//! Sampling of the constrained signed ensemble.
//!
//! A row is a uniform element of `{xi in {-1,0,1}^n : sum |xi_i| = d}`. It is drawn
//! as a uniform `d`-subset `S` of `[n]` (partial Fisher-Yates) together with
//! independent Rademacher signs on `S`, which gives every one of the
//! `C(n,d) * 2^d` admissible rows the same probability.

mod rng;

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use rng::{derive_stream, Label, RngStream};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Dimension `n` and row weight `d` of the ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleParams {
    pub n: usize,
    pub d: usize,
}

impl EnsembleParams {
    pub fn new(n: usize, d: usize) -> Result<Self> {
        let p = EnsembleParams { n, d };
        p.validate()?;
        Ok(p)
    }

    /// The default half-weight ensemble, `d = n/2`; `n` must be even.
    pub fn half(n: usize) -> Result<Self> {
        if n == 0 || !n.is_multiple_of(2) {
            return Err(Error::InvalidParams(format!(
                "n = {n} must be positive and even for d = n/2"
            )));
        }
        Self::new(n, n / 2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParams("n must be positive".into()));
        }
        if self.d == 0 || self.d > self.n {
            return Err(Error::InvalidParams(format!(
                "d = {} must satisfy 1 <= d <= n = {}",
                self.d, self.n
            )));
        }
        Ok(())
    }

    /// Number of admissible rows, `C(n,d) * 2^d`, or `None` on overflow.
    pub fn row_count(&self) -> Option<u128> {
        let b = binomial(self.n as u64, self.d as u64)?;
        b.checked_mul(1u128.checked_shl(self.d as u32)?)
    }
}

/// `C(n, k)` in `u128`, `None` on overflow.
pub fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// One row of the ensemble with its support/sign decomposition.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RowSample {
    pub values: Vec<i8>,
    /// Sorted indices of the nonzero coordinates.
    pub support: Vec<usize>,
    /// Rademacher signs, aligned with `support`.
    pub signs: Vec<i8>,
}

impl RowSample {
    /// Build a row from its entries, checking they lie in `{-1,0,1}`.
    pub fn from_values(values: Vec<i8>) -> Result<Self> {
        let mut support = Vec::new();
        let mut signs = Vec::new();
        for (i, &x) in values.iter().enumerate() {
            match x {
                0 => {}
                1 | -1 => {
                    support.push(i);
                    signs.push(x);
                }
                _ => {
                    return Err(Error::InvalidParams(format!(
                        "entry {x} at column {i} is not in {{-1,0,1}}"
                    )))
                }
            }
        }
        Ok(RowSample {
            values,
            support,
            signs,
        })
    }

    pub fn weight(&self) -> usize {
        self.support.len()
    }

    pub fn dot(&self, v: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(&self.signs)
            .map(|(&i, &s)| s as f64 * v[i])
            .sum()
    }
}

/// Draw one row. Every admissible row has probability `1 / (C(n,d) 2^d)`.
pub fn sample_row(params: EnsembleParams, rng: &mut impl Rng) -> RowSample {
    let EnsembleParams { n, d } = params;
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..d {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    let mut support = idx[..d].to_vec();
    support.sort_unstable();
    let signs: Vec<i8> = (0..d)
        .map(|_| if rng.random::<bool>() { 1 } else { -1 })
        .collect();
    let mut values = vec![0i8; n];
    for (&i, &s) in support.iter().zip(&signs) {
        values[i] = s;
    }
    debug_assert_eq!(values.iter().filter(|&&x| x != 0).count(), d);
    RowSample {
        values,
        support,
        signs,
    }
}

/// All admissible rows in a fixed order (supports in lexicographic order, then
/// sign patterns in binary order). Intended for small `n`.
pub fn enumerate_rows(params: EnsembleParams) -> Vec<RowSample> {
    let EnsembleParams { n, d } = params;
    let mut out = Vec::new();
    for support in combinations(n, d) {
        for mask in 0u64..(1u64 << d) {
            let signs: Vec<i8> = (0..d)
                .map(|b| if mask >> b & 1 == 0 { 1 } else { -1 })
                .collect();
            let mut values = vec![0i8; n];
            for (&i, &s) in support.iter().zip(&signs) {
                values[i] = s;
            }
            out.push(RowSample {
                values,
                support: support.clone(),
                signs,
            });
        }
    }
    out
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut c: Vec<usize> = (0..k).collect();
    loop {
        out.push(c.clone());
        let mut i = k;
        while i > 0 && c[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        c[i - 1] += 1;
        for j in i..k {
            c[j] = c[j - 1] + 1;
        }
    }
}

/// An `m x n` matrix whose rows are ensemble rows of weight `d`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedMatrix {
    pub rows: Vec<RowSample>,
    pub m: usize,
    pub n: usize,
    pub d: usize,
}

impl SignedMatrix {
    /// Assemble from rows, checking the entry set and the common row weight.
    pub fn from_rows(params: EnsembleParams, rows: Vec<RowSample>) -> Result<Self> {
        params.validate()?;
        if rows.is_empty() {
            return Err(Error::InvalidParams("matrix needs at least one row".into()));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.values.len() != params.n {
                return Err(Error::Dimension(format!(
                    "row {i} has length {}, expected {}",
                    r.values.len(),
                    params.n
                )));
            }
            if r.weight() != params.d {
                return Err(Error::InvalidParams(format!(
                    "row {i} has {} nonzeros, expected {}",
                    r.weight(),
                    params.d
                )));
            }
        }
        Ok(SignedMatrix {
            m: rows.len(),
            n: params.n,
            d: params.d,
            rows,
        })
    }

    pub fn params(&self) -> EnsembleParams {
        EnsembleParams {
            n: self.n,
            d: self.d,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> i8 {
        self.rows[i].values[j]
    }

    pub fn to_f64(&self) -> Matrix {
        Matrix::from_fn(self.m, self.n, |i, j| self.get(i, j) as f64)
    }

    pub fn to_i64(&self) -> Vec<Vec<i64>> {
        self.rows
            .iter()
            .map(|r| r.values.iter().map(|&x| x as i64).collect())
            .collect()
    }

    /// Squared Hilbert-Schmidt norm, computed in integers.
    pub fn hs_norm_sq(&self) -> u64 {
        self.rows
            .iter()
            .flat_map(|r| r.values.iter())
            .map(|&x| (x as i64 * x as i64) as u64)
            .sum()
    }

    /// Rows `0..k` as a new matrix.
    pub fn top_rows(&self, k: usize) -> SignedMatrix {
        let k = k.min(self.m);
        SignedMatrix {
            rows: self.rows[..k].to_vec(),
            m: k,
            n: self.n,
            d: self.d,
        }
    }

    /// Row-major CSV of integers, one matrix row per line.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            let line: Vec<String> = r.values.iter().map(|x| x.to_string()).collect();
            let _ = writeln!(s, "{}", line.join(","));
        }
        s
    }

    /// Parse the CSV form produced by [`SignedMatrix::to_csv`]. The row weight is
    /// taken from the first row and enforced on the rest.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let vals = line
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<i8>()
                        .map_err(|e| Error::Parse(format!("line {}: {e}", ln + 1)))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(RowSample::from_values(vals)?);
        }
        let first = rows
            .first()
            .ok_or_else(|| Error::Parse("empty matrix".into()))?;
        let params = EnsembleParams::new(first.values.len(), first.weight())?;
        SignedMatrix::from_rows(params, rows)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Draw an `m x n` matrix with i.i.d. rows.
pub fn sample_matrix(params: EnsembleParams, m: usize, rng: &mut impl Rng) -> SignedMatrix {
    assert!(m >= 1, "sample_matrix needs m >= 1");
    let rows = (0..m).map(|_| sample_row(params, rng)).collect();
    SignedMatrix {
        rows,
        m,
        n: params.n,
        d: params.d,
    }
}

/// `(1/reps) * sum R^T R` over `reps` sampled rows.
pub fn empirical_covariance(params: EnsembleParams, reps: usize, rng: &mut impl Rng) -> Matrix {
    assert!(reps >= 1, "empirical_covariance needs reps >= 1");
    let n = params.n;
    let mut acc = vec![0i64; n * n];
    for _ in 0..reps {
        let r = sample_row(params, rng);
        for (a, &i) in r.support.iter().enumerate() {
            for (b, &j) in r.support.iter().enumerate() {
                acc[i * n + j] += (r.signs[a] * r.signs[b]) as i64;
            }
        }
    }
    Matrix::from_fn(n, n, |i, j| acc[i * n + j] as f64 / reps as f64)
}

/// `E[R^T R]` by exhausting every admissible row.
pub fn exact_covariance(params: EnsembleParams) -> Matrix {
    let n = params.n;
    let rows = enumerate_rows(params);
    let mut acc = vec![0i64; n * n];
    for r in &rows {
        for i in 0..n {
            for j in 0..n {
                acc[i * n + j] += (r.values[i] * r.values[j]) as i64;
            }
        }
    }
    Matrix::from_fn(n, n, |i, j| acc[i * n + j] as f64 / rows.len() as f64)
}
