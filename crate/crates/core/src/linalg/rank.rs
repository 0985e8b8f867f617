//! Exact rank over the rationals.
//!
//! Two 62-bit primes give a cheap modular prescreen (rank mod p never exceeds
//! the rational rank). Whenever the two modular ranks disagree or fall short of
//! `min(m, n)`, the answer is settled by fraction-free Bareiss elimination over
//! arbitrary-precision integers.

use std::sync::OnceLock;

use num_bigint::BigInt;
use num_traits::Zero;
use rand::Rng;

use crate::ensemble::{RngStream, SignedMatrix};
use crate::error::{Error, Result};

const PRESCREEN_SEED: u64 = 0x5eed_ba7e_1a55_0001;

fn mul_mod(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

fn pow_mod(mut b: u64, mut e: u64, p: u64) -> u64 {
    let mut acc = 1u64;
    b %= p;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(acc, b, p);
        }
        b = mul_mod(b, b, p);
        e >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin for 64-bit integers.
fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for &b in &BASES {
        if n.is_multiple_of(b) {
            return n == b;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'outer: for &a in &BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'outer;
            }
        }
        return false;
    }
    true
}

/// The two prescreen primes, drawn once from a fixed stream.
pub fn prescreen_primes() -> &'static [u64; 2] {
    static PRIMES: OnceLock<[u64; 2]> = OnceLock::new();
    PRIMES.get_or_init(|| {
        let mut rng = RngStream::new(PRESCREEN_SEED).child("primes");
        let mut draw = || loop {
            let c = rng.random_range((1u64 << 61)..(1u64 << 62)) | 1;
            if is_prime(c) {
                return c;
            }
        };
        let a = draw();
        let mut b = draw();
        while b == a {
            b = draw();
        }
        [a, b]
    })
}

fn shape(m: &[Vec<i64>]) -> Result<(usize, usize)> {
    let rows = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    if m.iter().any(|r| r.len() != cols) {
        return Err(Error::Dimension("ragged integer matrix".into()));
    }
    Ok((rows, cols))
}

/// Rank of `m` over `GF(p)`.
pub fn rank_mod_p(m: &[Vec<i64>], p: u64) -> usize {
    let cols = m.first().map_or(0, |r| r.len());
    let mut a: Vec<Vec<u64>> = m
        .iter()
        .map(|r| r.iter().map(|&x| x.rem_euclid(p as i64) as u64).collect())
        .collect();
    let rows = a.len();
    let mut rank = 0;
    for c in 0..cols {
        let Some(piv) = (rank..rows).find(|&i| a[i][c] != 0) else {
            continue;
        };
        a.swap(rank, piv);
        let inv = pow_mod(a[rank][c], p - 2, p);
        for i in rank + 1..rows {
            if a[i][c] == 0 {
                continue;
            }
            let f = mul_mod(a[i][c], inv, p);
            let (top, bottom) = a.split_at_mut(i);
            for (x, &y) in bottom[0][c..cols].iter_mut().zip(&top[rank][c..cols]) {
                *x = (*x + p - mul_mod(f, y, p)) % p;
            }
        }
        rank += 1;
        if rank == rows {
            break;
        }
    }
    rank
}

/// Rank by fraction-free Gaussian elimination. Pivot is the first nonzero entry
/// in the current column; a column with no pivot is skipped.
pub fn bareiss_rank(m: &[Vec<i64>]) -> usize {
    let cols = m.first().map_or(0, |r| r.len());
    let mut a: Vec<Vec<BigInt>> = m
        .iter()
        .map(|r| r.iter().map(|&x| BigInt::from(x)).collect())
        .collect();
    let rows = a.len();
    let mut prev = BigInt::from(1);
    let mut rank = 0;
    for c in 0..cols {
        if rank == rows {
            break;
        }
        let Some(piv) = (rank..rows).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(rank, piv);
        let (head, tail) = a.split_at_mut(rank + 1);
        let pivot_row = &head[rank];
        let pivot = &pivot_row[c];
        for row in tail.iter_mut() {
            for j in c + 1..cols {
                let num = pivot * &row[j] - &row[c] * &pivot_row[j];
                debug_assert!((&num % &prev).is_zero());
                row[j] = num / &prev;
            }
            row[c] = BigInt::zero();
        }
        prev = a[rank][c].clone();
        rank += 1;
    }
    rank
}

/// Rank of an integer matrix over the rationals.
pub fn exact_rank(m: &[Vec<i64>]) -> Result<usize> {
    let (rows, cols) = shape(m)?;
    let full = rows.min(cols);
    if full == 0 {
        return Ok(0);
    }
    let [p1, p2] = *prescreen_primes();
    let r1 = rank_mod_p(m, p1);
    let r2 = rank_mod_p(m, p2);
    if r1 == r2 && r1 == full {
        return Ok(full);
    }
    Ok(bareiss_rank(m))
}

/// `true` iff the square matrix `m` has rational rank below `n`.
pub fn is_singular(m: &SignedMatrix) -> Result<bool> {
    if m.m != m.n {
        return Err(Error::Dimension(format!(
            "is_singular needs a square matrix, got {} x {}",
            m.m, m.n
        )));
    }
    Ok(exact_rank(&m.to_i64())? < m.n)
}
