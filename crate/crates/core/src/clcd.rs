//! Certified scans of the combinatorial least common denominator.
//!
//! For a direction `w` (either `D(v)` or the pair tensor `D(a) (x) D(v)`), set
//!
//! ```text
//! f(t) = dist(t w, Z^N),   g(t) = min(gamma t ||w||, alpha),   F = f - g.
//! ```
//!
//! The CLCD is `inf { t > 0 : F(t) < 0 }`. `F` is Lipschitz with constant
//! `(1 + gamma) ||w||`, so if `F(a) + F(b) > L (b - a)` with `F(a), F(b) >= 0` then
//! `F > 0` on all of `[a, b]`. The scan walks the grid `t_k = k h`, certifies each
//! step with that test (bisecting a step that fails it), and stops at the first
//! negative value. On `(0, 1/(2 ||w||_inf)]` every coordinate of `t w` rounds to
//! zero, so `f(t) = t ||w|| > g(t)` there and no evaluation is needed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{difference_vector, sign_pattern_vector};
use crate::linalg::norm2;

/// Depth of the bisection used on grid steps the endpoint test cannot certify.
const REFINE_DEPTH: u32 = 24;

/// Euclidean distance from `x` to the integer lattice.
pub fn lattice_distance(x: &[f64]) -> f64 {
    x.iter()
        .map(|&t| {
            let r = t - t.round_ties_even();
            r * r
        })
        .sum::<f64>()
        .sqrt()
}

/// Parameters of one scan. `alpha` and `gamma` are the additive and relative
/// tolerances of the CLCD (for the pair form they play the roles of `L` and `u`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClcdQuery {
    pub alpha: f64,
    pub gamma: f64,
    pub theta_max: f64,
    pub h: f64,
}

impl ClcdQuery {
    pub fn new(alpha: f64, gamma: f64, theta_max: f64, h: f64) -> Result<Self> {
        let q = ClcdQuery {
            alpha,
            gamma,
            theta_max,
            h,
        };
        q.validate()?;
        Ok(q)
    }

    /// Query with the dimensionless default step `h = 1e-4 / ||w||`.
    pub fn with_default_step(alpha: f64, gamma: f64, theta_max: f64, w_norm: f64) -> Result<Self> {
        if !(w_norm > 0.0 && w_norm.is_finite()) {
            return Err(Error::ZeroDirection);
        }
        Self::new(alpha, gamma, theta_max, 1e-4 / w_norm)
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha.is_nan() || self.alpha <= 0.0 {
            return Err(Error::Precondition(format!("alpha = {} must be > 0", self.alpha)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Precondition(format!(
                "gamma = {} must lie in (0,1)",
                self.gamma
            )));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::Precondition(format!("grid step h = {} must be > 0", self.h)));
        }
        if !self.theta_max.is_finite() || self.theta_max < self.h {
            return Err(Error::Precondition(format!(
                "theta_max = {} must be finite and >= h = {}",
                self.theta_max, self.h
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClcdOutcome {
    /// The CLCD lies in `[lo, hi]`; `F(hi) < 0`.
    Bracket { lo: f64, hi: f64 },
    /// No crossing in `(0, theta_max]`.
    AtLeast { theta_max: f64 },
    /// No crossing in `(0, certified_to]`; beyond that the scan could not decide.
    Unresolved { certified_to: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClcdResult {
    pub outcome: ClcdOutcome,
    /// `(1 + gamma) ||w|| h`: the Lipschitz slack over one grid step.
    pub lipschitz_margin: f64,
}

impl ClcdResult {
    /// A value the CLCD is certified to be at least.
    pub fn certified_lower_bound(&self) -> f64 {
        match self.outcome {
            ClcdOutcome::Bracket { lo, .. } => lo,
            ClcdOutcome::AtLeast { theta_max } => theta_max,
            ClcdOutcome::Unresolved { certified_to } => certified_to,
        }
    }

    /// Upper end of the bracket, when one was found.
    pub fn upper_bound(&self) -> Option<f64> {
        match self.outcome {
            ClcdOutcome::Bracket { hi, .. } => Some(hi),
            _ => None,
        }
    }

    /// Where the scan stopped: bracket top, ceiling, or first undecided point.
    pub fn stop_point(&self) -> f64 {
        match self.outcome {
            ClcdOutcome::Bracket { hi, .. } => hi,
            ClcdOutcome::AtLeast { theta_max } => theta_max,
            ClcdOutcome::Unresolved { certified_to } => certified_to,
        }
    }

    pub fn is_bracket(&self) -> bool {
        matches!(self.outcome, ClcdOutcome::Bracket { .. })
    }
}

/// A direction given as blocks of coordinates with integer multiplicities, so
/// repeated copies of a vector need not be materialized.
#[derive(Debug, Clone)]
pub struct Direction {
    blocks: Vec<(Vec<f64>, f64)>,
    norm: f64,
    max_abs: f64,
}

impl Direction {
    pub fn plain(w: Vec<f64>) -> Self {
        Self::weighted(vec![(w, 1.0)])
    }

    /// Coordinates with zero multiplicity or value are dropped; they add nothing
    /// to either the lattice distance or the norm.
    pub fn weighted(blocks: Vec<(Vec<f64>, f64)>) -> Self {
        let blocks: Vec<(Vec<f64>, f64)> = blocks
            .into_iter()
            .filter(|(_, m)| *m > 0.0)
            .map(|(w, m)| (w.into_iter().filter(|&x| x != 0.0).collect::<Vec<_>>(), m))
            .filter(|(w, _)| !w.is_empty())
            .collect();
        let norm = blocks
            .iter()
            .map(|(w, m)| m * w.iter().map(|x| x * x).sum::<f64>())
            .sum::<f64>()
            .sqrt();
        let max_abs = blocks
            .iter()
            .flat_map(|(w, _)| w.iter())
            .fold(0.0f64, |a, x| a.max(x.abs()));
        Direction {
            blocks,
            norm,
            max_abs,
        }
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn max_abs(&self) -> f64 {
        self.max_abs
    }

    /// `dist(t w, Z^N)`.
    pub fn lattice_distance_at(&self, t: f64) -> f64 {
        self.blocks
            .iter()
            .map(|(w, m)| {
                m * w
                    .iter()
                    .map(|&x| {
                        let y = t * x;
                        let r = y - y.round_ties_even();
                        r * r
                    })
                    .sum::<f64>()
            })
            .sum::<f64>()
            .sqrt()
    }

    /// `F(t) = f(t) - min(gamma t ||w||, alpha)`.
    pub fn margin_at(&self, t: f64, alpha: f64, gamma: f64) -> f64 {
        self.lattice_distance_at(t) - (gamma * t * self.norm).min(alpha)
    }
}

enum Step {
    Clear,
    Crossing { lo: f64, hi: f64 },
    Undecided { at: f64 },
}

struct Scanner<'a> {
    dir: &'a Direction,
    alpha: f64,
    gamma: f64,
    lip: f64,
}

impl Scanner<'_> {
    fn f(&self, t: f64) -> f64 {
        self.dir.margin_at(t, self.alpha, self.gamma)
    }

    /// Decide `[a, b]` given nonnegative `fa` and `fb`.
    fn interval(&self, a: f64, fa: f64, b: f64, fb: f64, depth: u32) -> Step {
        if fa + fb > self.lip * (b - a) {
            return Step::Clear;
        }
        if depth == 0 {
            return Step::Undecided { at: a };
        }
        let m = 0.5 * (a + b);
        let fm = self.f(m);
        if fm < 0.0 {
            return Step::Crossing { lo: a, hi: m };
        }
        if fm == 0.0 {
            return Step::Undecided { at: a };
        }
        match self.interval(a, fa, m, fm, depth - 1) {
            Step::Clear => self.interval(m, fm, b, fb, depth - 1),
            other => other,
        }
    }
}

/// Scan `F` along `dir` over the grid `k h`, `k = 1..ceil(theta_max / h)`.
pub fn scan_direction(dir: &Direction, query: &ClcdQuery) -> Result<ClcdResult> {
    query.validate()?;
    if dir.norm() == 0.0 {
        return Err(Error::ZeroDirection);
    }
    let ClcdQuery {
        alpha,
        gamma,
        theta_max,
        h,
    } = *query;
    let sc = Scanner {
        dir,
        alpha,
        gamma,
        lip: (1.0 + gamma) * dir.norm(),
    };
    let result = |outcome| ClcdResult {
        outcome,
        lipschitz_margin: sc.lip * h,
    };

    let safe = 0.5 / dir.max_abs();
    let steps = (theta_max / h).ceil() as u64;
    let first = ((safe / h).floor() as u64).max(1);
    if first >= steps {
        return Ok(result(ClcdOutcome::AtLeast { theta_max }));
    }
    // Everything up to `first * h <= safe` is clear analytically.
    let mut a = first as f64 * h;
    let mut fa = sc.f(a);
    if fa < 0.0 {
        // Unreachable for gamma < 1, kept for robustness against rounding.
        return Ok(result(ClcdOutcome::Bracket {
            lo: a - h,
            hi: a,
        }));
    }
    for k in first + 1..=steps {
        let b = k as f64 * h;
        let fb = sc.f(b);
        if fb < 0.0 {
            return Ok(result(ClcdOutcome::Bracket { lo: a, hi: b }));
        }
        if fb == 0.0 {
            return Ok(result(ClcdOutcome::Unresolved { certified_to: a }));
        }
        match sc.interval(a, fa, b, fb, REFINE_DEPTH) {
            Step::Clear => {}
            Step::Crossing { lo, hi } => {
                return Ok(result(ClcdOutcome::Bracket { lo, hi }));
            }
            Step::Undecided { at } => {
                return Ok(result(ClcdOutcome::Unresolved { certified_to: at }));
            }
        }
        a = b;
        fa = fb;
    }
    Ok(result(ClcdOutcome::AtLeast { theta_max }))
}

/// `CLCD_{alpha,gamma}(v)` along `D(v)`.
pub fn clcd_scan(v: &[f64], query: &ClcdQuery) -> Result<ClcdResult> {
    let dv = difference_vector(v)?;
    scan_direction(&Direction::plain(dv.entries), query)
}

/// `D(a^{(p,q)}) (x) D(v)` via the counting decomposition: `n^2/4` copies of
/// `D(v)` and `pq` copies of `2 D(v)`; the remaining coordinates are zero.
pub fn pair_direction(p: usize, q: usize, v: &[f64]) -> Result<Direction> {
    let n = v.len();
    sign_pattern_vector(p, q, n)?;
    let dv = difference_vector(v)?;
    let doubled: Vec<f64> = dv.entries.iter().map(|x| 2.0 * x).collect();
    let dir = Direction::weighted(vec![
        (dv.entries, (n * n / 4) as f64),
        (doubled, (p * q) as f64),
    ]);
    if dir.norm() == 0.0 {
        return Err(Error::ZeroDirection);
    }
    Ok(dir)
}

/// Every coordinate `(a_i - a_j)(v_k - v_l)` of the pair tensor, zeros included.
pub fn pair_tensor_full(p: usize, q: usize, v: &[f64]) -> Result<Vec<f64>> {
    let a = sign_pattern_vector(p, q, v.len())?;
    let da = difference_vector(&a)?;
    let dv = difference_vector(v)?;
    let mut out = Vec::with_capacity(da.entries.len() * dv.entries.len());
    for &x in &da.entries {
        for &y in &dv.entries {
            out.push(x * y);
        }
    }
    Ok(out)
}

/// `CLCD^{a}_{L,u}(v)` for `a = a^{(p,q)}`; `query.alpha` is `L`, `query.gamma` is `u`.
pub fn pair_clcd_scan(p: usize, q: usize, v: &[f64], query: &ClcdQuery) -> Result<ClcdResult> {
    let dir = pair_direction(p, q, v)?;
    scan_direction(&dir, query)
}

/// `min{ CLCD_{alpha,gamma}(v), alpha / (4 sqrt(n) ||v - w||) }`, with the first
/// term replaced by the scan's certified lower bound. For `w` close to `v` this
/// lower-bounds `CLCD_{alpha/2, gamma/2}(w)`.
pub fn stability_lower_bound(v: &[f64], w: &[f64], query: &ClcdQuery) -> Result<f64> {
    let n = v.len();
    if w.len() != n {
        return Err(Error::Dimension(format!("|v| = {n}, |w| = {}", w.len())));
    }
    let dv = difference_vector(v)?;
    let diff: Vec<f64> = v.iter().zip(w).map(|(a, b)| a - b).collect();
    let gap = norm2(&diff);
    let radius = query.gamma * dv.norm() / (5.0 * (n as f64).sqrt());
    if gap.is_nan() || gap >= radius {
        return Err(Error::Precondition(format!(
            "||v - w|| = {gap:e} must be below gamma ||D(v)|| / (5 sqrt n) = {radius:e}"
        )));
    }
    let lb = clcd_scan(v, query)?.certified_lower_bound();
    let second = if gap == 0.0 {
        f64::INFINITY
    } else {
        query.alpha / (4.0 * (n as f64).sqrt() * gap)
    };
    Ok(lb.min(second))
}

/// Dyadic placement of a CLCD value: the level set `S_H` holds vectors whose
/// CLCD lies in `[H, 2H]`, with `H` a power of two.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LevelSet {
    /// The bracket fits inside `[H, 2H]`.
    Level { h: f64 },
    /// The bracket crosses the power of two `2H`; the CLCD sits in `S_H` or `S_{2H}`.
    Boundary { h: f64 },
    /// No bracket: the CLCD is at least `bound`.
    Above { bound: f64 },
}

pub fn level_set(result: &ClcdResult) -> LevelSet {
    match result.outcome {
        ClcdOutcome::Bracket { lo, hi } => {
            let h = 2f64.powi(lo.log2().floor() as i32);
            if hi <= 2.0 * h {
                LevelSet::Level { h }
            } else {
                LevelSet::Boundary { h }
            }
        }
        _ => LevelSet::Above {
            bound: result.certified_lower_bound(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canonical() -> Vec<f64> {
        let s = 0.5f64.sqrt();
        vec![s, -s, 0.0, 0.0]
    }

    #[test]
    fn canonical_vector_level() {
        let q = ClcdQuery::new(1.0, 0.05, 2.0, 1e-4).unwrap();
        let r = clcd_scan(&canonical(), &q).unwrap();
        assert_eq!(level_set(&r), LevelSet::Level { h: 1.0 });
        let low = ClcdQuery::new(1.0, 0.05, 1.0, 1e-4).unwrap();
        let r = clcd_scan(&canonical(), &low).unwrap();
        assert_eq!(level_set(&r), LevelSet::Above { bound: 1.0 });
    }

    #[test]
    fn lattice_distance_examples() {
        assert_eq!(lattice_distance(&[0.5]), 0.5);
        assert!((lattice_distance(&[1.25, -0.75]) - 0.25 * 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(lattice_distance(&[3.0, -2.0, 0.0]), 0.0);
    }

    #[test]
    fn canonical_vector_crossing() {
        // Near t = sqrt 2 the lattice distance is 2|t - sqrt 2| and the threshold
        // is 0.1 t, so the crossing sits at t* = 2 sqrt 2 / 2.1.
        let q = ClcdQuery::new(1.0, 0.05, 2.0, 1e-4).unwrap();
        let r = clcd_scan(&canonical(), &q).unwrap();
        let ClcdOutcome::Bracket { lo, hi } = r.outcome else {
            panic!("expected bracket, got {r:?}");
        };
        let t_star = 2.0 * 2f64.sqrt() / 2.1;
        assert!(lo <= t_star && t_star <= hi, "[{lo}, {hi}] vs {t_star}");
        assert!(hi - lo <= 1e-4 + 1e-15);
        assert!(hi < 2f64.sqrt());
        // sqrt 2 itself satisfies the inequality.
        let dir = Direction::plain(difference_vector(&canonical()).unwrap().entries);
        assert!(dir.margin_at(2f64.sqrt(), 1.0, 0.05) < 0.0);
    }

    #[test]
    fn no_bracket_below_first_half_integer() {
        let v = [0.9, -0.3, 0.2, 0.1, 0.35];
        let dv = difference_vector(&v).unwrap();
        let q = ClcdQuery::new(10.0, 0.5, 5.0, 1e-3).unwrap();
        let r = clcd_scan(&v, &q).unwrap();
        assert!(r.certified_lower_bound() >= 0.5 / dv.max_abs() - 1e-3);
    }

    #[test]
    fn zero_direction_rejected() {
        let q = ClcdQuery::new(1.0, 0.1, 1.0, 1e-3).unwrap();
        assert!(matches!(clcd_scan(&[0.5, 0.5], &q), Err(Error::ZeroDirection)));
    }

    #[test]
    fn query_validation() {
        assert!(ClcdQuery::new(0.0, 0.1, 1.0, 0.1).is_err());
        assert!(ClcdQuery::new(1.0, 1.0, 1.0, 0.1).is_err());
        assert!(ClcdQuery::new(1.0, 0.1, 0.01, 0.1).is_err());
        assert!(ClcdQuery::new(1.0, 0.1, 1.0, 0.0).is_err());
    }

    #[test]
    fn at_least_when_ceiling_is_in_safe_zone() {
        let q = ClcdQuery::new(1.0, 0.1, 0.1, 1e-3).unwrap();
        let r = clcd_scan(&canonical(), &q).unwrap();
        assert_eq!(r.outcome, ClcdOutcome::AtLeast { theta_max: 0.1 });
    }

    #[test]
    fn pair_scan_parity_guard() {
        let q = ClcdQuery::new(1.0, 0.1, 1.0, 1e-3).unwrap();
        assert!(matches!(
            pair_clcd_scan(0, 0, &canonical(), &q),
            Err(Error::Parity { .. })
        ));
    }

    #[test]
    fn pair_scan_matches_full_expansion_for_canonical_vector() {
        let v = canonical();
        let q = ClcdQuery::new(3.0, 0.05, 2.0, 1e-4).unwrap();
        let a = pair_clcd_scan(1, 1, &v, &q).unwrap();
        let full = pair_tensor_full(1, 1, &v).unwrap();
        assert_eq!(full.len(), 36);
        let b = scan_direction(&Direction::plain(full), &q).unwrap();
        assert!(a.is_bracket());
        assert_eq!(a.outcome, b.outcome);
    }

    #[test]
    fn stability_zero_perturbation() {
        let v = canonical();
        let q = ClcdQuery::new(1.0, 0.05, 2.0, 1e-4).unwrap();
        let lb = stability_lower_bound(&v, &v, &q).unwrap();
        assert_eq!(lb, clcd_scan(&v, &q).unwrap().certified_lower_bound());
    }

    #[test]
    fn stability_precondition() {
        let v = canonical();
        let w = [0.0, 0.0, 0.0, 1.0];
        let q = ClcdQuery::new(1.0, 0.05, 2.0, 1e-4).unwrap();
        assert!(matches!(
            stability_lower_bound(&v, &w, &q),
            Err(Error::Precondition(_))
        ));
    }
}
