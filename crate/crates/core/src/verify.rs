//! Invariant suites behind the `verify` subcommand. Each check is cheap enough
//! to run on every invocation and draws from a fixed stream.

use std::fmt;
use std::str::FromStr;

use crate::clcd::{clcd_scan, pair_clcd_scan, ClcdQuery, Direction};
use crate::ensemble::{
    derive_stream, enumerate_rows, exact_covariance, sample_matrix, sample_row, EnsembleParams, RngStream,
};
use crate::error::{Error, Result};
use crate::experiments::{distance_tail, singularity_exact, ExperimentConfig};
use crate::geometry::{
    almost_constant_witness, difference_counts, difference_vector, random_unit_vector, sign_pattern_vector,
    tensor_pair_norm,
};
use crate::linalg::{exact_rank, singular_values, Matrix};
use crate::smallball::{enumerate_wv, levy_exact, paley_zygmund};

const VERIFY_SEED: u64 = 0x5eed_0f7e;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Identities,
    Ensemble,
    Linalg,
    Clcd,
    Smallball,
    All,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "identities" => Suite::Identities,
            "ensemble" => Suite::Ensemble,
            "linalg" => Suite::Linalg,
            "clcd" => Suite::Clcd,
            "smallball" => Suite::Smallball,
            "all" => Suite::All,
            other => return Err(Error::Parse(format!("unknown suite {other:?}"))),
        })
    }
}

#[derive(Debug, Clone)]
pub struct Check {
    pub suite: &'static str,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}/{}: {}", self.suite, self.name, self.detail)
    }
}

fn check(suite: &'static str, name: &'static str, outcome: Result<(bool, String)>) -> Check {
    let (pass, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    Check {
        suite,
        name,
        pass,
        detail,
    }
}

fn rng(suite: &str, name: &str) -> RngStream {
    derive_stream(VERIFY_SEED, &[suite.into(), name.into()])
}

pub fn run_suite(suite: Suite) -> Vec<Check> {
    match suite {
        Suite::Identities => identities(),
        Suite::Ensemble => ensemble(),
        Suite::Linalg => linalg(),
        Suite::Clcd => clcd(),
        Suite::Smallball => smallball(),
        Suite::All => [identities(), ensemble(), linalg(), clcd(), smallball()].concat(),
    }
}

fn identities() -> Vec<Check> {
    const S: &str = "identities";
    vec![
        check(S, "tensor_norm", {
            let mut r = rng(S, "tensor_norm");
            let mut worst: f64 = 0.0;
            let mut counts_ok = true;
            for n in [4, 8] {
                for _ in 0..5 {
                    let v = random_unit_vector(n, &mut r);
                    for p in 0..=n / 2 {
                        let q = n / 2 - p;
                        worst = worst.max(tensor_pair_norm(p, q, &v).map(|t| t.relative_gap()).unwrap_or(f64::INFINITY));
                        let a = sign_pattern_vector(p, q, n).unwrap();
                        counts_ok &= difference_counts(&a) == (n * n / 4, p * q);
                    }
                }
            }
            Ok((worst <= 1e-12 && counts_ok, format!("max relative gap {worst:.2e}, counts exact: {counts_ok}")))
        }),
        check(S, "hs_norm", (|| {
            let mut r = rng(S, "hs_norm");
            let mut bad = 0;
            let mut worst: f64 = 0.0;
            for n in [4, 8] {
                for m in [n - 1, n] {
                    for _ in 0..15 {
                        let p = EnsembleParams::half(n)?;
                        let a = sample_matrix(p, m, &mut r);
                        bad += (a.hs_norm_sq() != (m * p.d) as u64) as usize;
                        let s = singular_values(&a.to_f64())?;
                        let sum: f64 = s.singular_values.iter().map(|x| x * x).sum();
                        worst = worst.max((sum - (m * p.d) as f64).abs() / (m * p.d) as f64);
                    }
                }
            }
            Ok((bad == 0 && worst <= 1e-9, format!("{bad} integer mismatches, spectral rel. gap {worst:.1e}")))
        })()),
        check(S, "covariance", (|| {
            let c = exact_covariance(EnsembleParams::new(6, 3)?);
            let gap = (0..6)
                .flat_map(|i| (0..6).map(move |j| (i, j)))
                .map(|(i, j)| (c.get(i, j) - if i == j { 0.5 } else { 0.0 }).abs())
                .fold(0.0, f64::max);
            Ok((gap == 0.0, format!("max |E[R^T R] - I/2| = {gap:e} (n=6, d=3)")))
        })()),
        check(S, "distance_identity", (|| {
            let cfg = ExperimentConfig::new(EnsembleParams::half(8)?, 100, VERIFY_SEED).with_eps_grid(vec![0.5]);
            let rep = distance_tail(&cfg)?;
            Ok((rep.max_identity_error <= 1e-10, format!(
                "max |dist - |<R,v>|| = {:.1e} over {} replicas",
                rep.max_identity_error,
                rep.distances.len()
            )))
        })()),
    ]
}

fn ensemble() -> Vec<Check> {
    const S: &str = "ensemble";
    vec![
        check(S, "row_weight", (|| {
            let p = EnsembleParams::new(10, 3)?;
            let mut r = rng(S, "row_weight");
            let ok = (0..1000).all(|_| {
                let row = sample_row(p, &mut r);
                row.weight() == 3 && row.values.iter().all(|x| x.abs() <= 1)
            });
            Ok((ok, "1000 rows at n=10, d=3".into()))
        })()),
        check(S, "row_count", (|| {
            let p = EnsembleParams::new(5, 2)?;
            let got = enumerate_rows(p).len() as u128;
            Ok((Some(got) == p.row_count(), format!("{got} rows enumerated, C(5,2) 2^2 = 40")))
        })()),
        check(S, "stream_determinism", {
            use rand::RngCore;
            let mut a = derive_stream(1, &["x".into(), 3u64.into()]);
            let mut b = derive_stream(1, &["x".into(), 3u64.into()]);
            let mut c = derive_stream(1, &["x".into(), 4u64.into()]);
            let (xa, xb, xc) = (a.next_u64(), b.next_u64(), c.next_u64());
            Ok((xa == xb && xa != xc, "same path repeats, sibling differs".into()))
        }),
    ]
}

fn linalg() -> Vec<Check> {
    const S: &str = "linalg";
    vec![
        check(S, "singular_count_n2", (|| {
            let (k, total) = singularity_exact(EnsembleParams::new(2, 1)?)?;
            Ok((k == 8 && total == 16, format!("{k} of {total} singular")))
        })()),
        check(S, "signed_permutation", (|| {
            let m = Matrix::from_rows(&[[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, -1.0]]);
            let s = singular_values(&m)?;
            let gap = s.singular_values.iter().map(|x| (x - 1.0).abs()).fold(0.0, f64::max);
            Ok((gap <= 1e-14, format!("max |s_i - 1| = {gap:.1e}")))
        })()),
        check(S, "exact_vs_float_rank", (|| {
            let p = EnsembleParams::half(6)?;
            let mut r = rng(S, "rank");
            let mut disagree = 0;
            let mut singular = 0;
            for _ in 0..200 {
                let a = sample_matrix(p, 6, &mut r);
                let exact = exact_rank(&a.to_i64())? < 6;
                let float = singular_values(&a.to_f64())?.smallest < 1e-8;
                disagree += (exact != float) as usize;
                singular += exact as usize;
            }
            Ok((disagree == 0, format!("{disagree} disagreements, {singular} singular of 200")))
        })()),
    ]
}

fn clcd() -> Vec<Check> {
    const S: &str = "clcd";
    vec![
        check(S, "canonical_bracket", (|| {
            let s = 0.5f64.sqrt();
            let q = ClcdQuery::new(1.0, 0.05, 2.0, 1e-4)?;
            let r = clcd_scan(&[s, -s, 0.0, 0.0], &q)?;
            let t_star = 2.0 * 2f64.sqrt() / 2.1;
            let ok = r.is_bracket() && r.certified_lower_bound() <= t_star && r.upper_bound() >= Some(t_star);
            Ok((ok, format!("{:?}, first crossing at {t_star:.6}", r.outcome)))
        })()),
        check(S, "large_clcd", (|| {
            let (n, delta, rho) = (16usize, 0.1, 0.1);
            let gamma = delta * rho / 13.0;
            let floor = (delta * n as f64).sqrt() / 7.0;
            let q = ClcdQuery::new(1.0, gamma, floor, 1e-4)?;
            let mut r = rng(S, "large_clcd");
            let mut below = 0;
            for _ in 0..20 {
                let v = loop {
                    let v = random_unit_vector(n, &mut r);
                    if almost_constant_witness(&v, delta, rho).is_none() {
                        break v;
                    }
                };
                let dq = ClcdQuery { h: 1e-4 / difference_vector(&v)?.norm(), ..q };
                below += clcd_scan(&v, &dq)?.is_bracket() as usize;
            }
            Ok((below == 0, format!("{below} of 20 bracket below {floor:.4}")))
        })()),
        check(S, "pair_comparison", (|| {
            let n = 8;
            let (alpha, u) = (1.0, 0.1);
            let mut r = rng(S, "pair_comparison");
            let mut violations = 0;
            for k in 0..8 {
                let v = random_unit_vector(n, &mut r);
                let p = k % (n / 2 + 1);
                let q = n / 2 - p;
                let dv = Direction::plain(difference_vector(&v)?.entries);
                let plain = clcd_scan(&v, &ClcdQuery::with_default_step(alpha, 2f64.sqrt() * u, 2.0, dv.norm())?)?;
                let pair = pair_clcd_scan(p, q, &v, &ClcdQuery::with_default_step(alpha * n as f64 / 2.0, u, 2.0, dv.norm())?)?;
                if let Some(hi) = pair.upper_bound() {
                    violations += (plain.certified_lower_bound() > hi + plain.lipschitz_margin.max(1e-4)) as usize;
                }
            }
            Ok((violations == 0, format!("{violations} violations over 8 (v, p, q)")))
        })()),
    ]
}

fn smallball() -> Vec<Check> {
    const S: &str = "smallball";
    vec![
        check(S, "basis_law", (|| {
            let dist = enumerate_wv(&[1.0, 0.0, 0.0, 0.0], EnsembleParams::half(4)?)?;
            let got: Vec<(f64, f64)> = dist.atoms.iter().map(|a| (a.value, a.weight)).collect();
            Ok((got == [(-1.0, 0.25), (0.0, 0.5), (1.0, 0.25)], format!("{got:?}")))
        })()),
        check(S, "moments_symmetry_pz", (|| {
            let p = EnsembleParams::half(8)?;
            let mut r = rng(S, "moments");
            let mut worst: f64 = 0.0;
            let mut pz_ok = true;
            let mut monotone = true;
            for _ in 0..10 {
                let v = random_unit_vector(8, &mut r);
                let dist = enumerate_wv(&v, p)?;
                worst = worst
                    .max(dist.moment(1).abs())
                    .max((dist.moment(2) - 0.5).abs())
                    .max(dist.symmetry_defect());
                for lambda in [0.1, 0.3, 0.6] {
                    let (lhs, rhs) = paley_zygmund(&dist, lambda);
                    pz_ok &= lhs + 1e-12 >= rhs;
                }
                let mut last = 0.0;
                for eps in [0.0, 0.05, 0.2, 0.5, 3.0] {
                    let l = levy_exact(&dist, eps)?.estimate;
                    monotone &= l >= last;
                    last = l;
                }
                monotone &= (last - 1.0).abs() <= 1e-12;
            }
            Ok((worst <= 1e-12 && pz_ok && monotone, format!(
                "moment/symmetry gap {worst:.1e}, Paley-Zygmund {pz_ok}, Levy monotone {monotone}"
            )))
        })()),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_suites_pass() {
        for c in run_suite(Suite::All) {
            assert!(c.pass, "{c}");
        }
    }
}
