//! Vector taxonomy of the unit sphere and the pairwise-difference lift.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::norm2;

/// `D(v)`: the coordinates `v_i - v_j` for `i < j` in lexicographic order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferenceVector {
    pub entries: Vec<f64>,
    pub source_dim: usize,
}

impl DifferenceVector {
    /// Position of the pair `(i, j)`, `i < j`, in `entries`.
    pub fn index(&self, i: usize, j: usize) -> usize {
        pair_index(self.source_dim, i, j)
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.entries)
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

pub(crate) fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

pub fn difference_vector(v: &[f64]) -> Result<DifferenceVector> {
    let n = v.len();
    if n < 2 {
        return Err(Error::Dimension("difference vector needs n >= 2".into()));
    }
    let mut entries = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            entries.push(v[i] - v[j]);
        }
    }
    Ok(DifferenceVector {
        entries,
        source_dim: n,
    })
}

/// Gaussian direction normalized to the unit sphere.
pub fn random_unit_vector(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let nv = norm2(&v);
        if nv > 1e-300 {
            return v.into_iter().map(|x| x / nv).collect();
        }
    }
}

pub fn normalize(v: &[f64]) -> Option<Vec<f64>> {
    let nv = norm2(v);
    (nv > 0.0 && nv.is_finite()).then(|| v.iter().map(|x| x / nv).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VectorKind {
    Sparse,
    Compressible,
    Incompressible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyVerdict {
    pub kind: VectorKind,
    pub sparse_distance: f64,
    pub almost_constant: bool,
    pub witness_lambda: Option<f64>,
    pub delta: f64,
    pub rho: f64,
}

fn check_unit(v: &[f64]) -> Result<()> {
    let nv = norm2(v);
    if (nv - 1.0).abs() > 1e-9 {
        return Err(Error::NonUnit(nv));
    }
    Ok(())
}

fn check_fraction(name: &str, x: f64) -> Result<()> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::Precondition(format!("{name} = {x} must lie in (0,1)")));
    }
    Ok(())
}

/// `l2` distance from `v` to the set of vectors with at most `k` nonzeros.
pub fn sparse_distance(v: &[f64], k: usize) -> f64 {
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    mags.iter().skip(k).map(|x| x * x).sum::<f64>().sqrt()
}

/// Smallest count that is at least `x`, absorbing rounding noise in `x`.
fn count_at_least(x: f64) -> usize {
    (x - 1e-9).ceil().max(0.0) as usize
}

/// A level `lambda` with at least `(1-delta) n` coordinates inside
/// `[lambda - rho/sqrt(n), lambda + rho/sqrt(n)]`, if one exists.
///
/// Windows are anchored at coordinate values: an optimal window can always be
/// slid right until its left edge touches a coordinate, so this is exhaustive.
/// The returned level is the midpoint of the extreme coordinates captured.
pub fn almost_constant_witness(v: &[f64], delta: f64, rho: f64) -> Option<f64> {
    let n = v.len();
    if n == 0 {
        return None;
    }
    let width = 2.0 * rho / (n as f64).sqrt();
    let need = count_at_least((1.0 - delta) * n as f64).max(1);
    let mut xs = v.to_vec();
    xs.sort_by(f64::total_cmp);
    let mut j = 0;
    for i in 0..n {
        if j < i {
            j = i;
        }
        while j + 1 < n && xs[j + 1] - xs[i] <= width * (1.0 + 1e-12) {
            j += 1;
        }
        if j + 1 - i >= need {
            return Some(0.5 * (xs[i] + xs[j]));
        }
    }
    None
}

/// Place a unit vector in the sparse / compressible / incompressible taxonomy
/// and decide whether it is almost-constant.
pub fn classify_vector(v: &[f64], delta: f64, rho: f64) -> Result<TaxonomyVerdict> {
    check_fraction("delta", delta)?;
    check_fraction("rho", rho)?;
    check_unit(v)?;
    let n = v.len();
    let k = (delta * n as f64 + 1e-9).floor() as usize;
    let support = v.iter().filter(|&&x| x != 0.0).count();
    let dist = sparse_distance(v, k);
    let kind = if support <= k {
        VectorKind::Sparse
    } else if dist <= rho {
        VectorKind::Compressible
    } else {
        VectorKind::Incompressible
    };
    let witness = almost_constant_witness(v, delta, rho);
    Ok(TaxonomyVerdict {
        kind,
        sparse_distance: dist,
        almost_constant: witness.is_some(),
        witness_lambda: witness,
        delta,
        rho,
    })
}

/// Disjoint index sets of size at least `delta n / 8` whose cross differences
/// all lie in `[rho / sqrt(2n), 6 / sqrt(delta n)]`.
///
/// Coordinates are sorted; the lower set is a run of sorted positions ending
/// at some gap and the upper set a run starting after it. Minimal runs are
/// searched exhaustively, then each run is grown as far as the bounds allow.
pub fn separated_subsets(v: &[f64], delta: f64, rho: f64) -> Result<(Vec<usize>, Vec<usize>)> {
    check_fraction("delta", delta)?;
    check_fraction("rho", rho)?;
    check_unit(v)?;
    if almost_constant_witness(v, delta, rho).is_some() {
        return Err(Error::Precondition("vector is almost-constant".into()));
    }
    let n = v.len();
    let nf = n as f64;
    let lo = rho / (2.0 * nf).sqrt();
    let hi = 6.0 / (delta * nf).sqrt();
    let s = count_at_least(delta * nf / 8.0).max(1);
    if 2 * s > n {
        return Err(Error::NotFound);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let x: Vec<f64> = order.iter().map(|&i| v[i]).collect();

    // Runs [a, b] and [c, e] (inclusive, sorted positions, b < c) are valid when
    // x[c] - x[b] >= lo and x[e] - x[a] <= hi.
    let ok = |a: usize, b: usize, c: usize, e: usize| x[c] - x[b] >= lo && x[e] - x[a] <= hi;
    for a in 0..=n - 2 * s {
        let b = a + s - 1;
        for c in b + 1..=n - s {
            let e = c + s - 1;
            if !ok(a, b, c, e) {
                continue;
            }
            let (mut a, mut b, mut c, mut e) = (a, b, c, e);
            while a > 0 && ok(a - 1, b, c, e) {
                a -= 1;
            }
            while e + 1 < n && ok(a, b, c, e + 1) {
                e += 1;
            }
            while b + 1 < c && ok(a, b + 1, c, e) {
                b += 1;
            }
            while c > b + 1 && ok(a, b, c - 1, e) {
                c -= 1;
            }
            let mut s1: Vec<usize> = order[a..=b].to_vec();
            let mut s2: Vec<usize> = order[c..=e].to_vec();
            s1.sort_unstable();
            s2.sort_unstable();
            return Ok((s1, s2));
        }
    }
    Err(Error::NotFound)
}

/// An `eps`-net of `S^{n-1}` built by greedy insertion of random probes.
///
/// Probes are drawn in rounds of `round_size`; a probe farther than `eps` from
/// every net point joins the net. Construction stops after a full round adds
/// nothing. Net points are pairwise more than `eps` apart, so the net has at
/// most `(1 + 2/eps)^n <= (3/eps)^n` points.
pub fn volumetric_net(
    n: usize,
    eps: f64,
    round_size: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Vec<f64>>> {
    if n == 0 || n > 8 {
        return Err(Error::GuardExceeded(format!(
            "volumetric_net supports 1 <= n <= 8, got {n}"
        )));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Precondition(format!("eps = {eps} must lie in (0,1)")));
    }
    let round_size = round_size.max(1);
    let mut net: Vec<Vec<f64>> = Vec::new();
    loop {
        let mut added = false;
        for _ in 0..round_size {
            let p = random_unit_vector(n, rng);
            if nearest_distance(&net, &p) > eps {
                net.push(p);
                added = true;
            }
        }
        if !added {
            break;
        }
    }
    net.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(net)
}

/// Distance from `p` to the closest point of `net` (infinite for an empty net).
pub fn nearest_distance(net: &[Vec<f64>], p: &[f64]) -> f64 {
    net.iter()
        .map(|q| {
            q.iter()
                .zip(p)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

/// `a^{(p,q)} = (1 x p, 0 x n/2, -1 x q)`.
pub fn sign_pattern_vector(p: usize, q: usize, n: usize) -> Result<Vec<f64>> {
    if !n.is_multiple_of(2) || p + q != n / 2 {
        return Err(Error::Parity {
            sum: p + q,
            half: n / 2,
        });
    }
    let mut a = vec![0.0; n];
    a[..p].iter_mut().for_each(|x| *x = 1.0);
    a[n - q..].iter_mut().for_each(|x| *x = -1.0);
    Ok(a)
}

/// Number of pairs `i < j` with `|a_i - a_j| = 1` and `= 2`.
pub fn difference_counts(a: &[f64]) -> (usize, usize) {
    let mut ones = 0;
    let mut twos = 0;
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            let d = (a[i] - a[j]).abs();
            if d == 1.0 {
                ones += 1;
            } else if d == 2.0 {
                twos += 1;
            }
        }
    }
    (ones, twos)
}

/// `||D(a^{(p,q)}) (x) D(v)||_2` by the closed form and by full expansion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TensorNorm {
    pub closed_form: f64,
    pub direct: f64,
}

impl TensorNorm {
    pub fn relative_gap(&self) -> f64 {
        (self.closed_form - self.direct).abs() / self.direct.abs().max(f64::MIN_POSITIVE)
    }

    pub fn agrees(&self, tol: f64) -> bool {
        self.relative_gap() <= tol || (self.closed_form == 0.0 && self.direct == 0.0)
    }
}

pub fn tensor_pair_norm(p: usize, q: usize, v: &[f64]) -> Result<TensorNorm> {
    let n = v.len();
    let a = sign_pattern_vector(p, q, n)?;
    let dv = difference_vector(v)?;
    let closed_form = ((n * n) as f64 / 4.0 + 4.0 * (p * q) as f64).sqrt() * dv.norm();
    let da = difference_vector(&a)?;
    let mut acc = 0.0;
    for &x in &da.entries {
        for &y in &dv.entries {
            let t = x * y;
            acc += t * t;
        }
    }
    Ok(TensorNorm {
        closed_form,
        direct: acc.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::RngStream;

    #[test]
    fn difference_examples() {
        let d = difference_vector(&[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(d.entries, vec![1.0, 1.0, 0.0]);
        assert!((d.norm() - 2f64.sqrt()).abs() < 1e-15);
        let c = difference_vector(&[0.3; 5]).unwrap();
        assert!(c.entries.iter().all(|&x| x == 0.0));
        let s = 0.5f64.sqrt();
        let d = difference_vector(&[s, -s, 0.0, 0.0]).unwrap();
        let want = [2.0 * s, s, s, -s, -s, 0.0];
        for (a, b) in d.entries.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(d.index(1, 3), 4);
    }

    #[test]
    fn pair_index_is_lexicographic() {
        let n = 7;
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                assert_eq!(pair_index(n, i, j), k);
                k += 1;
            }
        }
    }

    #[test]
    fn basis_vector_is_sparse() {
        let mut v = vec![0.0; 10];
        v[0] = 1.0;
        let t = classify_vector(&v, 0.2, 0.1).unwrap();
        assert_eq!(t.kind, VectorKind::Sparse);
        assert_eq!(t.sparse_distance, 0.0);
    }

    #[test]
    fn constant_vector_is_almost_constant() {
        let n = 9;
        let v = vec![1.0 / (n as f64).sqrt(); n];
        let t = classify_vector(&v, 0.1, 0.1).unwrap();
        assert!(t.almost_constant);
        assert!((t.witness_lambda.unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(t.kind, VectorKind::Incompressible);
    }

    #[test]
    fn spread_vector_is_incompressible_and_not_almost_constant() {
        // Half the mass on a cosine profile, half on distinct evenly spread levels.
        let n = 20;
        let mut v: Vec<f64> = (0..n)
            .map(|i| {
                if i < n / 2 {
                    (2.0 / n as f64).sqrt() * (1.0 + 0.5 * (i as f64).cos())
                } else {
                    -1.0 + 2.0 * (i - n / 2) as f64 / (n / 2) as f64
                }
            })
            .collect();
        let nv = norm2(&v);
        v.iter_mut().for_each(|x| *x /= nv);
        let t = classify_vector(&v, 0.1, 0.1).unwrap();
        // Direct evaluation: top-2 magnitudes removed leaves most of the mass.
        assert!(t.sparse_distance > 0.1);
        assert_eq!(t.kind, VectorKind::Incompressible);
        // No window of width 2*0.1/sqrt(20) ~ 0.045 holds 18 of 20 coordinates.
        assert!(!t.almost_constant);
    }

    #[test]
    fn non_unit_rejected() {
        assert!(matches!(
            classify_vector(&[1.0, 1.0], 0.1, 0.1),
            Err(Error::NonUnit(_))
        ));
        assert!(classify_vector(&[1.0, 0.0], 0.0, 0.1).is_err());
    }

    #[test]
    fn two_level_vector_splits_into_its_levels() {
        let n = 16;
        let (a, b) = (0.2, 0.3);
        let mut v: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { a } else { b }).collect();
        let nv = norm2(&v);
        v.iter_mut().for_each(|x| *x /= nv);
        let (s1, s2) = separated_subsets(&v, 0.1, 0.1).unwrap();
        let evens: Vec<usize> = (0..n).step_by(2).collect();
        let odds: Vec<usize> = (1..n).step_by(2).collect();
        assert_eq!(s1, evens);
        assert_eq!(s2, odds);
    }

    #[test]
    fn separated_subsets_rejects_almost_constant() {
        let v = vec![0.25; 16];
        assert!(matches!(
            separated_subsets(&v, 0.1, 0.1),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn net_on_s0() {
        let net = volumetric_net(1, 0.5, 100, &mut RngStream::new(1)).unwrap();
        assert_eq!(net, vec![vec![-1.0], vec![1.0]]);
    }

    #[test]
    fn net_guard() {
        assert!(matches!(
            volumetric_net(9, 0.5, 10, &mut RngStream::new(1)),
            Err(Error::GuardExceeded(_))
        ));
        assert!(volumetric_net(2, 1.0, 10, &mut RngStream::new(1)).is_err());
    }

    #[test]
    fn sign_pattern_and_counts() {
        let a = sign_pattern_vector(2, 1, 6).unwrap();
        assert_eq!(a, vec![1.0, 1.0, 0.0, 0.0, 0.0, -1.0]);
        assert_eq!(difference_counts(&a), (9, 2));
        assert!(matches!(
            sign_pattern_vector(0, 0, 4),
            Err(Error::Parity { sum: 0, half: 2 })
        ));
    }

    #[test]
    fn tensor_norm_n4_p1_q1() {
        let v = [0.3, -1.2, 0.7, 0.05];
        let t = tensor_pair_norm(1, 1, &v).unwrap();
        let dv = difference_vector(&v).unwrap().norm();
        assert!((t.closed_form - 8f64.sqrt() * dv).abs() < 1e-12);
        assert!(t.agrees(1e-12));
    }

    #[test]
    fn tensor_norm_pq_zero() {
        let v = [0.3, -1.2, 0.7, 0.05, 2.0, -0.4];
        let t = tensor_pair_norm(0, 3, &v).unwrap();
        let dv = difference_vector(&v).unwrap().norm();
        assert!((t.closed_form - 3.0 * dv).abs() < 1e-12);
        assert!(t.agrees(1e-12));
    }
}
