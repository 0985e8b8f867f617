//! The linear form `W_v = <xi, v>` for an ensemble row `xi`, its exact law, and
//! the Levy concentration function `L(X, eps) = sup_lambda P(|X - lambda| <= eps)`.

use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{binomial, combinations, sample_row, EnsembleParams};
use crate::error::{Error, Result};
use crate::geometry::difference_vector;

/// Values closer than this are one atom.
pub const MERGE_TOL: f64 = 1e-12;

/// Largest number of equally likely outcomes `enumerate_wv` will visit.
pub const ENUMERATION_GUARD: u128 = 10_000_000;

/// Confidence level parameter for the Monte Carlo band.
pub const MC_BETA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub value: f64,
    pub weight: f64,
}

/// A finite law: atoms with strictly increasing values and positive weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomDistribution {
    pub atoms: Vec<Atom>,
    pub n: usize,
    pub d: usize,
}

impl AtomDistribution {
    /// Merge `(value, weight)` pairs into atoms. Values within [`MERGE_TOL`] of
    /// their sorted neighbour join the same atom, which is placed at the midpoint
    /// of its extreme values. Zero weights are dropped and the rest renormalized.
    pub fn from_weighted(mut pairs: Vec<(f64, f64)>, n: usize, d: usize) -> Self {
        pairs.retain(|&(_, w)| w > 0.0);
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        let mut atoms: Vec<Atom> = Vec::new();
        let mut group: Option<(f64, f64, f64)> = None; // (min, max, weight)
        for (x, w) in pairs {
            match group {
                Some((lo, hi, acc)) if x - hi <= MERGE_TOL => group = Some((lo, x, acc + w)),
                Some((lo, hi, acc)) => {
                    atoms.push(Atom {
                        value: 0.5 * (lo + hi),
                        weight: acc / total,
                    });
                    group = Some((x, x, w));
                }
                None => group = Some((x, x, w)),
            }
        }
        if let Some((lo, hi, acc)) = group {
            atoms.push(Atom {
                value: 0.5 * (lo + hi),
                weight: acc / total,
            });
        }
        AtomDistribution { atoms, n, d }
    }

    /// Equally likely outcomes.
    pub fn from_outcomes(values: Vec<f64>, n: usize, d: usize) -> Self {
        Self::from_weighted(values.into_iter().map(|x| (x, 1.0)).collect(), n, d)
    }

    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    pub fn max_atom(&self) -> f64 {
        self.atoms.iter().fold(0.0, |m, a| m.max(a.weight))
    }

    pub fn moment(&self, k: i32) -> f64 {
        self.atoms.iter().map(|a| a.weight * a.value.powi(k)).sum()
    }

    /// `P(|X| > lambda)`.
    pub fn abs_tail(&self, lambda: f64) -> f64 {
        self.atoms
            .iter()
            .filter(|a| a.value.abs() > lambda)
            .map(|a| a.weight)
            .sum()
    }

    /// `P(lo <= X <= hi)`.
    pub fn mass_in(&self, lo: f64, hi: f64) -> f64 {
        self.atoms
            .iter()
            .filter(|a| a.value >= lo && a.value <= hi)
            .map(|a| a.weight)
            .sum()
    }

    /// Largest deviation from the reflection symmetry `x -> -x`.
    pub fn symmetry_defect(&self) -> f64 {
        let k = self.atoms.len();
        let mut worst: f64 = 0.0;
        for i in 0..k {
            let a = self.atoms[i];
            let b = self.atoms[k - 1 - i];
            worst = worst.max((a.value + b.value).abs()).max((a.weight - b.weight).abs());
        }
        worst
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("value,weight\n");
        for a in &self.atoms {
            let _ = writeln!(s, "{},{}", a.value, a.weight);
        }
        s
    }

    pub fn from_csv(text: &str, n: usize, d: usize) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let mut atoms = Vec::new();
        for rec in rdr.deserialize::<Atom>() {
            atoms.push(rec.map_err(|e| Error::Parse(e.to_string()))?);
        }
        Ok(AtomDistribution { atoms, n, d })
    }
}

fn check_len(v: &[f64], params: EnsembleParams) -> Result<()> {
    params.validate()?;
    if v.len() != params.n {
        return Err(Error::Dimension(format!(
            "vector length {} vs n = {}",
            v.len(),
            params.n
        )));
    }
    Ok(())
}

/// One draw of `W_v`.
pub fn sample_wv(v: &[f64], params: EnsembleParams, rng: &mut impl Rng) -> f64 {
    sample_row(params, rng).dot(v)
}

fn guard(params: EnsembleParams) -> Result<()> {
    match params.row_count() {
        Some(c) if c <= ENUMERATION_GUARD => Ok(()),
        c => Err(Error::GuardExceeded(format!(
            "C({n},{d}) 2^{d} = {c:?} outcomes exceeds {ENUMERATION_GUARD}",
            n = params.n,
            d = params.d
        ))),
    }
}

/// All `2^|s|` signed sums over the support `s`, indexed by sign mask (bit `b`
/// set means coordinate `s[b]` enters with a minus sign).
fn signed_sums(v: &[f64], support: &[usize]) -> Vec<f64> {
    let mut sums = vec![0.0];
    for &i in support.iter().rev() {
        let x = v[i];
        sums = sums.iter().flat_map(|&s| [s + x, s - x]).collect();
    }
    sums
}

/// Exact law of `W_v`, exhausting all `C(n,d) 2^d` equally likely rows.
pub fn enumerate_wv(v: &[f64], params: EnsembleParams) -> Result<AtomDistribution> {
    check_len(v, params)?;
    guard(params)?;
    let supports = combinations(params.n, params.d);
    let values: Vec<f64> = supports
        .par_iter()
        .flat_map_iter(|s| signed_sums(v, s))
        .collect();
    Ok(AtomDistribution::from_outcomes(values, params.n, params.d))
}

/// The law of `W_v` given that the row has `plus` entries equal to `+1` and
/// `minus` entries equal to `-1`.
#[derive(Debug, Clone)]
pub struct MixtureComponent {
    pub plus: usize,
    pub minus: usize,
    /// `P(plus, minus) = C(d, plus) / 2^d`.
    pub probability: f64,
    pub law: AtomDistribution,
}

/// Split the exact law of `W_v` by sign counts.
pub fn mixture_components(v: &[f64], params: EnsembleParams) -> Result<Vec<MixtureComponent>> {
    check_len(v, params)?;
    guard(params)?;
    let d = params.d;
    let supports = combinations(params.n, d);
    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); d + 1];
    for s in &supports {
        for (mask, x) in signed_sums(v, s).into_iter().enumerate() {
            let minus = (mask as u64).count_ones() as usize;
            buckets[d - minus].push(x);
        }
    }
    Ok(buckets
        .into_iter()
        .enumerate()
        .map(|(plus, vals)| MixtureComponent {
            plus,
            minus: d - plus,
            probability: binomial(d as u64, plus as u64).unwrap() as f64 / 2f64.powi(d as i32),
            law: AtomDistribution::from_outcomes(vals, params.n, d),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevyMethod {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevyEstimate {
    pub epsilon: f64,
    pub estimate: f64,
    pub ci_halfwidth: f64,
    pub sample_count: usize,
    pub method: LevyMethod,
}

/// `sup_lambda P(|X - lambda| <= eps)` for a finite law.
///
/// An optimal closed window of width `2 eps` can be slid right until its left
/// edge meets an atom, so a two-pointer sweep over atom-anchored windows is
/// exact. Window edges are compared with [`MERGE_TOL`] slack.
pub fn levy_exact(dist: &AtomDistribution, epsilon: f64) -> Result<LevyEstimate> {
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(Error::Precondition(format!("epsilon = {epsilon} must be >= 0")));
    }
    let atoms = &dist.atoms;
    let width = 2.0 * epsilon + MERGE_TOL;
    let mut best: f64 = 0.0;
    let mut j = 0;
    let mut acc = 0.0;
    for i in 0..atoms.len() {
        if j < i {
            j = i;
            acc = 0.0;
        }
        while j < atoms.len() && atoms[j].value - atoms[i].value <= width {
            acc += atoms[j].weight;
            j += 1;
        }
        best = best.max(acc);
        acc -= atoms[i].weight;
    }
    Ok(LevyEstimate {
        epsilon,
        estimate: best.clamp(0.0, 1.0),
        ci_halfwidth: 0.0,
        sample_count: 0,
        method: LevyMethod::Exact,
    })
}

/// `2 sqrt(ln(2/beta) / (2N))`: twice the DKW band, covering the window count
/// (a difference of two empirical CDF values) uniformly over windows.
pub fn mc_halfwidth(samples: usize, beta: f64) -> f64 {
    2.0 * ((2.0 / beta).ln() / (2.0 * samples as f64)).sqrt()
}

/// Largest fraction of `sorted` inside a closed window of width `2 eps`.
pub fn max_window_fraction(sorted: &[f64], epsilon: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let width = 2.0 * epsilon;
    let mut best = 0;
    let mut j = 0;
    for i in 0..sorted.len() {
        if j < i {
            j = i;
        }
        while j < sorted.len() && sorted[j] - sorted[i] <= width {
            j += 1;
        }
        best = best.max(j - i);
    }
    best as f64 / sorted.len() as f64
}

/// Monte Carlo Levy estimates on a grid of scales from one shared sample.
pub fn levy_mc_grid(
    v: &[f64],
    params: EnsembleParams,
    eps_grid: &[f64],
    samples: usize,
    rng: &mut impl Rng,
) -> Result<Vec<LevyEstimate>> {
    check_len(v, params)?;
    if samples < 100 {
        return Err(Error::Precondition(format!(
            "levy_mc needs at least 100 samples, got {samples}"
        )));
    }
    let mut xs: Vec<f64> = (0..samples).map(|_| sample_wv(v, params, rng)).collect();
    xs.sort_by(f64::total_cmp);
    let ci = mc_halfwidth(samples, MC_BETA);
    eps_grid
        .iter()
        .map(|&e| {
            if e.is_nan() || e < 0.0 {
                return Err(Error::Precondition(format!("epsilon = {e} must be >= 0")));
            }
            Ok(LevyEstimate {
                epsilon: e,
                estimate: max_window_fraction(&xs, e),
                ci_halfwidth: ci,
                sample_count: samples,
                method: LevyMethod::MonteCarlo,
            })
        })
        .collect()
}

pub fn levy_mc(
    v: &[f64],
    params: EnsembleParams,
    epsilon: f64,
    samples: usize,
    rng: &mut impl Rng,
) -> Result<LevyEstimate> {
    Ok(levy_mc_grid(v, params, &[epsilon], samples, rng)?[0])
}

/// Both sides of the Paley-Zygmund inequality for `X = |W|`:
/// `P(X > lambda)` and `(E X^2 - lambda^2)^2 / E X^4`.
pub fn paley_zygmund(dist: &AtomDistribution, lambda: f64) -> (f64, f64) {
    let m2 = dist.moment(2);
    let m4 = dist.moment(4);
    let rhs = if lambda * lambda < m2 {
        (m2 - lambda * lambda).powi(2) / m4
    } else {
        0.0
    };
    (dist.abs_tail(lambda), rhs)
}

/// Law of `y = sum_i x_i G_i` with independent `G_i` in `{-1,0,1}`,
/// `P(G_i = +-1) = p_i / 2`. This is a column sum of the ensemble conditioned on
/// earlier columns, where `p_i` is row `i`'s remaining inclusion probability.
pub fn conditional_column_law(x: &[f64], p: &[f64]) -> Result<AtomDistribution> {
    if x.len() != p.len() {
        return Err(Error::Dimension("x and p differ in length".into()));
    }
    if x.len() > 12 {
        return Err(Error::GuardExceeded(format!(
            "3^{} outcomes is too many",
            x.len()
        )));
    }
    if p.iter().any(|&pi| !(0.0..=1.0).contains(&pi)) {
        return Err(Error::Precondition("inclusion probabilities must lie in [0,1]".into()));
    }
    let mut pairs = vec![(0.0, 1.0)];
    for (&xi, &pi) in x.iter().zip(p) {
        pairs = pairs
            .iter()
            .flat_map(|&(s, w)| {
                [
                    (s, w * (1.0 - pi)),
                    (s + xi, w * pi / 2.0),
                    (s - xi, w * pi / 2.0),
                ]
            })
            .collect();
    }
    Ok(AtomDistribution::from_weighted(pairs, x.len(), 0))
}

/// Inclusion probabilities for column `j` (0-based) given the first `j` columns
/// of an ensemble matrix: row `i` still needs `d - k_i` nonzeros among the
/// `n - j` remaining columns.
pub fn column_inclusion_probs(prefix_nonzeros: &[usize], params: EnsembleParams, j: usize) -> Vec<f64> {
    let remaining = (params.n - j) as f64;
    prefix_nonzeros
        .iter()
        .map(|&k| (params.d - k) as f64 / remaining)
        .collect()
}

/// Per-vector outcome of checking `L(W_v, eps) <= C (eps + 1/CLCD + e^{-2 alpha^2 / n})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LotReport {
    /// `||D(v)||_2 / sqrt(n)`.
    pub d_norm_ratio: f64,
    pub in_hypothesis: bool,
    pub clcd_lower_bound: f64,
    pub alpha: f64,
    pub gamma: f64,
    /// `(eps, L(W_v, eps), ratio)` per grid point.
    pub grid: Vec<(f64, f64, f64)>,
    /// Smallest constant making the inequality hold on the grid.
    pub c_hat: f64,
}

/// Evaluate the anti-concentration inequality on `eps_grid` with the exact law
/// of `W_v`. The constant is reported, never asserted; vectors with
/// `||D(v)|| < b sqrt(n)` are flagged as outside the hypothesis.
#[allow(clippy::too_many_arguments)]
pub fn lot_check(
    v: &[f64],
    params: EnsembleParams,
    eps_grid: &[f64],
    alpha: f64,
    gamma: f64,
    clcd_lb: f64,
    b: f64,
) -> Result<LotReport> {
    let dist = enumerate_wv(v, params)?;
    let n = params.n as f64;
    let ratio = difference_vector(v)?.norm() / n.sqrt();
    let floor = (-2.0 * alpha * alpha / n).exp();
    let mut grid = Vec::with_capacity(eps_grid.len());
    let mut c_hat: f64 = 0.0;
    for &e in eps_grid {
        let l = levy_exact(&dist, e)?.estimate;
        let r = l / (e + 1.0 / clcd_lb + floor);
        c_hat = c_hat.max(r);
        grid.push((e, l, r));
    }
    Ok(LotReport {
        d_norm_ratio: ratio,
        in_hypothesis: ratio >= b,
        clcd_lower_bound: clcd_lb,
        alpha,
        gamma,
        grid,
        c_hat,
    })
}

/// Aggregate of [`LotReport`]s over a corpus of vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LotCorpus {
    pub vectors: usize,
    pub out_of_hypothesis: usize,
    /// Largest `c_hat` among vectors inside the hypothesis.
    pub max_c_hat: f64,
}

pub fn lot_corpus(reports: &[LotReport]) -> LotCorpus {
    LotCorpus {
        vectors: reports.len(),
        out_of_hypothesis: reports.iter().filter(|r| !r.in_hypothesis).count(),
        max_c_hat: reports
            .iter()
            .filter(|r| r.in_hypothesis)
            .fold(0.0, |m, r| m.max(r.c_hat)),
    }
}
