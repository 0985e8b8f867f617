//! Seeded Monte Carlo experiments over the ensemble.
//!
//! Every replica draws from its own substream `(seed, [experiment, replica])`,
//! so results do not depend on the worker count or on scheduling.

mod output;

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{derive_stream, enumerate_rows, sample_matrix, EnsembleParams, RngStream, SignedMatrix};
use crate::error::{Error, Result};
use crate::linalg::{distance_to_span, dot, exact_rank, is_singular, norm2, singular_values, unit_normal};

pub use output::{read_results, write_results, write_rows, OutputFormat};

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "SIGNED_RMT_WORKERS";

/// Largest number of matrices `singularity_probability` enumerates exactly.
pub const EXACT_CUTOFF: u128 = 1_000_000;

pub const DEFAULT_DELTA: f64 = 0.1;
pub const DEFAULT_RHO: f64 = 0.1;
pub const DEFAULT_GAMMA: f64 = DEFAULT_DELTA * DEFAULT_RHO / 13.0;
pub const DEFAULT_MU: f64 = 1e-5;

fn default_delta() -> f64 {
    DEFAULT_DELTA
}
fn default_rho() -> f64 {
    DEFAULT_RHO
}
fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}
fn default_mu() -> f64 {
    DEFAULT_MU
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub params: EnsembleParams,
    pub reps: usize,
    pub seed: u64,
    #[serde(default)]
    pub eps_grid: Vec<f64>,
    #[serde(default)]
    pub t_grid: Vec<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
    /// Overrides the worker count from the environment.
    #[serde(default)]
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(params: EnsembleParams, reps: usize, seed: u64) -> Self {
        ExperimentConfig {
            params,
            reps,
            seed,
            eps_grid: Vec::new(),
            t_grid: Vec::new(),
            delta: DEFAULT_DELTA,
            rho: DEFAULT_RHO,
            gamma: DEFAULT_GAMMA,
            mu: DEFAULT_MU,
            output_path: None,
            format: OutputFormat::Csv,
            workers: None,
        }
    }

    pub fn with_eps_grid(mut self, grid: Vec<f64>) -> Self {
        self.eps_grid = grid;
        self
    }

    pub fn with_t_grid(mut self, grid: Vec<f64>) -> Self {
        self.t_grid = grid;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.reps == 0 {
            return Err(Error::InvalidParams("reps must be at least 1".into()));
        }
        check_grid("eps_grid", &self.eps_grid)?;
        check_grid("t_grid", &self.t_grid)?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn stream(&self, experiment: &str, replica: usize) -> RngStream {
        derive_stream(self.seed, &[experiment.into(), replica.into()])
    }
}

fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::InvalidParams(format!("{name} must be finite and nonnegative")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParams(format!("{name} must be strictly increasing")));
    }
    Ok(())
}

/// One estimated probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub x: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub reps: usize,
    pub n: usize,
    pub d: usize,
    pub seed: u64,
}

impl ResultRow {
    /// Frequency `hits / reps` with its binomial standard error.
    pub fn from_count(experiment: &str, x: f64, hits: u64, reps: usize, params: EnsembleParams, seed: u64) -> Self {
        let estimate = if reps == 0 { 0.0 } else { hits as f64 / reps as f64 };
        ResultRow {
            experiment: experiment.to_string(),
            x,
            estimate,
            stderr: binomial_stderr(estimate, reps),
            reps,
            n: params.n,
            d: params.d,
            seed,
        }
    }
}

pub fn binomial_stderr(p: f64, reps: usize) -> f64 {
    if reps == 0 {
        0.0
    } else {
        (p * (1.0 - p) / reps as f64).sqrt()
    }
}

/// Worker count: `SIGNED_RMT_WORKERS` if set and positive, else the number of processors.
pub fn workers_from_env() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or_else(workers_from_env))
        .build()
        .map_err(|e| Error::Precondition(format!("worker pool: {e}")))
}

/// Run `f` once per replica on the worker pool. Output is in replica order.
fn replicate<T, F>(cfg: &ExperimentConfig, experiment: &str, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut RngStream) -> Result<T> + Sync,
{
    cfg.validate()?;
    pool(cfg.workers)?.install(|| {
        (0..cfg.reps)
            .into_par_iter()
            .map(|r| f(&mut cfg.stream(experiment, r)))
            .collect()
    })
}

fn count_rows(cfg: &ExperimentConfig, experiment: &str, grid: &[f64], event: impl Fn(f64) -> Box<dyn Fn(&f64) -> bool>, stats: &[f64]) -> Vec<ResultRow> {
    grid.iter()
        .map(|&x| {
            let hit = event(x);
            let hits = stats.iter().filter(|s| hit(s)).count() as u64;
            ResultRow::from_count(experiment, x, hits, stats.len(), cfg.params, cfg.seed)
        })
        .collect()
}

/// `P(s_n(M) <= eps / sqrt(n))` for each `eps` in the grid.
///
/// Each replica's smallest singular value is computed once and reused across
/// the grid, so the curve is monotone in `eps`. Exactly singular draws (exact
/// rank) count as `s_n = 0`.
pub fn tail_curve(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let n = cfg.params.n;
    let s_min = replicate(cfg, "tail", |rng| {
        let m = sample_matrix(cfg.params, n, rng);
        if is_singular(&m)? {
            return Ok(0.0);
        }
        Ok(singular_values(&m.to_f64())?.smallest)
    })?;
    let scale = (n as f64).sqrt();
    Ok(count_rows(
        cfg,
        "tail",
        &cfg.eps_grid,
        |eps| Box::new(move |s| *s <= eps / scale),
        &s_min,
    ))
}

/// `P(s_1(M) >= t sqrt(n))` for each `t` in the grid.
pub fn operator_norm_tail(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let n = cfg.params.n;
    let s_max = operator_norm_samples(cfg)?;
    let scale = (n as f64).sqrt();
    Ok(count_rows(
        cfg,
        "operator_norm",
        &cfg.t_grid,
        |t| Box::new(move |s| *s >= t * scale),
        &s_max,
    ))
}

/// Largest singular value of each replica.
pub fn operator_norm_samples(cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    replicate(cfg, "operator_norm", |rng| {
        let m = sample_matrix(cfg.params, cfg.params.n, rng);
        Ok(singular_values(&m.to_f64())?.largest)
    })
}

/// `(singular, total)` over every `n x n` matrix of the ensemble.
pub fn singularity_exact(params: EnsembleParams) -> Result<(u64, u64)> {
    let n = params.n;
    let total = params
        .row_count()
        .and_then(|r| r.checked_pow(n as u32))
        .filter(|&t| t <= EXACT_CUTOFF)
        .ok_or_else(|| {
            Error::GuardExceeded(format!(
                "enumerating n = {n}, d = {} exceeds {EXACT_CUTOFF} matrices",
                params.d
            ))
        })?;
    let rows: Vec<Vec<i64>> = enumerate_rows(params)
        .into_iter()
        .map(|r| r.values.iter().map(|&x| x as i64).collect())
        .collect();
    let r = rows.len() as u64;
    let singular = (0..total as u64)
        .into_par_iter()
        .map(|mut code| {
            let mut mat = Vec::with_capacity(n);
            for _ in 0..n {
                mat.push(rows[(code % r) as usize].clone());
                code /= r;
            }
            exact_rank(&mat).map(|k| (k < n) as u64)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok((singular, total as u64))
}

/// `P(M singular)` by exact enumeration when at most [`EXACT_CUTOFF`] matrices
/// exist, by sampling otherwise. The abscissa is `n`.
///
/// Enumeration rows report `reps` equal to the number of matrices enumerated.
pub fn singularity_probability(cfg: &ExperimentConfig) -> Result<ResultRow> {
    cfg.validate()?;
    match singularity_exact(cfg.params) {
        Ok((hits, total)) => Ok(ResultRow::from_count(
            "singularity_exact",
            cfg.params.n as f64,
            hits,
            total as usize,
            cfg.params,
            cfg.seed,
        )),
        Err(Error::GuardExceeded(_)) => singularity_mc(cfg),
        Err(e) => Err(e),
    }
}

/// Sampled `P(M singular)`, regardless of size.
pub fn singularity_mc(cfg: &ExperimentConfig) -> Result<ResultRow> {
    let n = cfg.params.n;
    let flags = replicate(cfg, "singularity", |rng| {
        is_singular(&sample_matrix(cfg.params, n, rng))
    })?;
    let hits = flags.iter().filter(|&&s| s).count() as u64;
    Ok(ResultRow::from_count("singularity_mc", n as f64, hits, cfg.reps, cfg.params, cfg.seed))
}

/// Outcome of [`distance_tail`].
#[derive(Debug, Clone)]
pub struct DistanceReport {
    /// One `distance_tail` row per `eps`, over corank-1 replicas, followed by a
    /// `distance_degenerate` row giving the fraction of all replicas whose first
    /// `n-1` rows are linearly dependent.
    pub rows: Vec<ResultRow>,
    pub degenerate: usize,
    /// Largest `|dist(R_n, H_n) - |<R_n, v_n>||` over corank-1 replicas.
    pub max_identity_error: f64,
    /// `dist(R_n, H_n)` per corank-1 replica.
    pub distances: Vec<f64>,
    /// `<R_n, v_n>` per corank-1 replica.
    pub inner_products: Vec<f64>,
}

/// `P(dist(R_n, H_n) <= eps)` where `H_n` is the span of the first `n-1` rows.
pub fn distance_tail(cfg: &ExperimentConfig) -> Result<DistanceReport> {
    let n = cfg.params.n;
    if n < 2 {
        return Err(Error::InvalidParams("distance_tail needs n >= 2".into()));
    }
    let samples = replicate(cfg, "distance", |rng| {
        let m = sample_matrix(cfg.params, n, rng);
        let head = m.top_rows(n - 1);
        if exact_rank(&head.to_i64())? < n - 1 {
            return Ok(None);
        }
        let basis = head.to_f64();
        let last = m.to_f64().row(n - 1).to_vec();
        let normal = unit_normal(&basis)?;
        let dist = distance_to_span(&last, &basis)?;
        Ok(Some((dist, dot(&last, &normal))))
    })?;
    let good: Vec<(f64, f64)> = samples.iter().flatten().copied().collect();
    let degenerate = samples.len() - good.len();
    let distances: Vec<f64> = good.iter().map(|p| p.0).collect();
    let inner_products: Vec<f64> = good.iter().map(|p| p.1).collect();
    let max_identity_error = good
        .iter()
        .fold(0.0f64, |m, &(dist, ip)| m.max((dist - ip.abs()).abs()));
    let mut rows = count_rows(
        cfg,
        "distance_tail",
        &cfg.eps_grid,
        |eps| Box::new(move |s| *s <= eps),
        &distances,
    );
    rows.push(ResultRow::from_count(
        "distance_degenerate",
        (n - 1) as f64,
        degenerate as u64,
        cfg.reps,
        cfg.params,
        cfg.seed,
    ));
    Ok(DistanceReport {
        rows,
        degenerate,
        max_identity_error,
        distances,
        inner_products,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmallBallMode {
    /// `||M v||_2 <= scale sqrt(n)`.
    Right,
    /// `||v^T M||_2 <= scale sqrt(n)`.
    Left,
}

impl SmallBallMode {
    pub fn default_scale(self) -> f64 {
        match self {
            SmallBallMode::Right => 0.25,
            SmallBallMode::Left => 1.0 / 36.0,
        }
    }
}

/// Frequency of the small-ball event for a fixed unit vector. The abscissa is
/// the threshold scale.
pub fn fixed_vector_smallball(
    cfg: &ExperimentConfig,
    v: &[f64],
    mode: SmallBallMode,
    scale: Option<f64>,
) -> Result<ResultRow> {
    let n = cfg.params.n;
    if v.len() != n {
        return Err(Error::Dimension(format!("vector length {} vs n = {n}", v.len())));
    }
    let norm = norm2(v);
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::NonUnit(norm));
    }
    let scale = scale.unwrap_or_else(|| mode.default_scale());
    let threshold = scale * (n as f64).sqrt();
    let name = match mode {
        SmallBallMode::Right => "fixed_vector_right",
        SmallBallMode::Left => "fixed_vector_left",
    };
    let flags = replicate(cfg, name, |rng| {
        let m = sample_matrix(cfg.params, n, rng).to_f64();
        let image = match mode {
            SmallBallMode::Right => m.mul_vec(v),
            SmallBallMode::Left => m.left_mul_vec(v),
        };
        Ok(norm2(&image) <= threshold)
    })?;
    let hits = flags.iter().filter(|&&f| f).count() as u64;
    Ok(ResultRow::from_count(name, scale, hits, cfg.reps, cfg.params, cfg.seed))
}

/// Empirical row covariance from the `(seed, ["covariance"])` stream.
pub fn covariance(cfg: &ExperimentConfig) -> Result<crate::linalg::Matrix> {
    cfg.validate()?;
    let mut rng = derive_stream(cfg.seed, &["covariance".into()]);
    Ok(crate::ensemble::empirical_covariance(cfg.params, cfg.reps, &mut rng))
}

/// Draw one matrix from the `(seed, ["sample", index])` stream.
pub fn sample_indexed(params: EnsembleParams, m: usize, seed: u64, index: usize) -> SignedMatrix {
    sample_matrix(params, m, &mut derive_stream(seed, &["sample".into(), index.into()]))
}

/// Least-squares line through the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OriginFit {
    pub slope: f64,
    /// `1 - SS_res / SS_tot` with `SS_tot` taken about the mean of `y`.
    pub r_squared: f64,
}

pub fn fit_through_origin(x: &[f64], y: &[f64]) -> OriginFit {
    assert_eq!(x.len(), y.len());
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|b| (b - mean).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else if ss_res == 0.0 { 1.0 } else { 0.0 };
    OriginFit { slope, r_squared }
}

/// Trend of estimates ordered by increasing abscissa.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Trend {
    /// Every estimate is strictly below its predecessor.
    pub decreasing: bool,
    /// Every upper band `estimate + 2 stderr` is strictly below the previous
    /// lower band `estimate - 2 stderr`.
    pub bands_separated: bool,
}

pub fn decreasing_trend(rows: &[ResultRow]) -> Trend {
    let decreasing = rows.windows(2).all(|w| w[1].estimate < w[0].estimate);
    let bands_separated = rows
        .windows(2)
        .all(|w| w[1].estimate + 2.0 * w[1].stderr < w[0].estimate - 2.0 * w[0].stderr);
    Trend {
        decreasing,
        bands_separated,
    }
}

/// `count` evenly spaced values from `start` to `stop` inclusive, rounded to 12
/// decimals so that `0.05:0.5:10` yields `0.15` rather than `0.15000000000000002`.
pub fn linspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    let tidy = |x: f64| (x * 1e12).round() / 1e12;
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..count)
            .map(|i| tidy(start + (stop - start) * i as f64 / (count - 1) as f64))
            .collect(),
    }
}
