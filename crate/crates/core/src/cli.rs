//! Command-line frontend.
//!
//! Exit codes: 0 success, 1 usage or parameter error, 2 verification failure,
//! 3 I/O error.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::clcd::{clcd_scan, pair_clcd_scan, ClcdQuery, Direction};
use crate::ensemble::{derive_stream, EnsembleParams, SignedMatrix};
use crate::error::{Error, Result};
use crate::experiments::{
    covariance, distance_tail, fixed_vector_smallball, linspace, operator_norm_tail, sample_indexed,
    singularity_exact, singularity_mc, singularity_probability, tail_curve, write_rows, ExperimentConfig,
    OutputFormat, ResultRow, SmallBallMode,
};
use crate::geometry::{difference_vector, normalize, random_unit_vector};
use crate::linalg::singular_values;
use crate::smallball::{enumerate_wv, levy_exact, levy_mc_grid, LevyEstimate};
use crate::verify::{run_suite, Suite};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VERIFY: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "signed-rmt", version, about = "Experiments on signed random combinatorial matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw matrices and print them as CSV.
    Sample(SampleArgs),
    /// Singular values per replica, operator-norm tail, or a fixed-vector small-ball probe.
    Spectrum(SpectrumArgs),
    /// Certified CLCD scan of a vector (or of a sign-pattern pair).
    Clcd(ClcdArgs),
    /// Levy concentration of W_v, exact or sampled.
    Levy(LevyArgs),
    /// P(s_n <= eps / sqrt n) over an eps grid.
    Tail(GridArgs),
    /// P(M singular), enumerated when small enough.
    Singularity(SingularityArgs),
    /// P(dist(R_n, H_n) <= eps) over an eps grid.
    Distance(GridArgs),
    /// Empirical row covariance.
    Covariance(CommonArgs),
    /// Run invariant suites; exits 2 on any failure.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Clone)]
struct CommonArgs {
    #[arg(long)]
    n: Option<usize>,
    /// Row weight; defaults to n/2.
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    /// Generated and printed when omitted.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// JSON experiment config; explicit flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct OutArgs {
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum FormatArg {
    Csv,
    Jsonl,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Jsonl => OutputFormat::Jsonl,
        }
    }
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Number of rows; defaults to n.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SpectrumArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    m: Option<usize>,
    /// Report P(s_1 >= t sqrt n) on this grid (start:stop:count).
    #[arg(long)]
    t_grid: Option<String>,
    /// Report P(|Mv| <= scale sqrt n) for this vector.
    #[arg(long)]
    vector: Option<String>,
    #[arg(long, value_enum, default_value = "right")]
    side: SideArg,
    /// Threshold scale; defaults to 1/4 (right) or 1/36 (left).
    #[arg(long)]
    scale: Option<f64>,
    #[arg(long)]
    no_normalize: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum SideArg {
    Right,
    Left,
}

#[derive(Args, Debug)]
struct ClcdArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// random | basis:k (1-based) | file:PATH
    #[arg(long, default_value = "random")]
    vector: String,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    /// Defaults to 4 (1/7) sqrt(delta n).
    #[arg(long)]
    theta_max: Option<f64>,
    /// Defaults to 1e-4 / |D(v)|.
    #[arg(long)]
    grid_step: Option<f64>,
    /// Scan the pair tensor for the sign pattern with P plus and Q minus ones.
    #[arg(long, value_name = "P:Q")]
    pair: Option<String>,
    #[arg(long)]
    no_normalize: bool,
}

#[derive(Args, Debug)]
struct LevyArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, default_value = "random")]
    vector: String,
    /// Comma-separated scales.
    #[arg(long, default_value = "0")]
    eps: String,
    /// Alternative to --eps: start:stop:count.
    #[arg(long)]
    eps_grid: Option<String>,
    /// Enumerate the law instead of sampling.
    #[arg(long)]
    exact: bool,
    #[arg(long)]
    no_normalize: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct GridArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// start:stop:count, endpoints included.
    #[arg(long)]
    eps_grid: Option<String>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct SingularityArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Require exact enumeration (fails if too large).
    #[arg(long, conflicts_with = "sample")]
    exact: bool,
    /// Sample even when enumeration is possible.
    #[arg(long)]
    sample: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, default_value = "all")]
    suite: String,
}

/// Parse `argv` (including the program name) and run; returns the exit code.
pub fn run(argv: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io { .. } | Error::Format { .. } => EXIT_IO,
                _ => EXIT_USAGE,
            }
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Sample(a) => sample(a),
        Command::Spectrum(a) => spectrum(a),
        Command::Clcd(a) => clcd(a),
        Command::Levy(a) => levy(a),
        Command::Tail(a) => {
            let cfg = grid_config(&a.common, a.eps_grid.as_deref())?;
            emit(&tail_curve(&cfg)?, &a.out)
        }
        Command::Distance(a) => {
            let cfg = grid_config(&a.common, a.eps_grid.as_deref())?;
            let rep = distance_tail(&cfg)?;
            println!(
                "corank-1 replicas: {}  degenerate: {}  max identity error: {:.2e}",
                rep.distances.len(),
                rep.degenerate,
                rep.max_identity_error
            );
            emit(&rep.rows, &a.out)
        }
        Command::Singularity(a) => {
            let cfg = config(&a.common)?;
            let row = if a.exact {
                let (k, total) = singularity_exact(cfg.params)?;
                ResultRow::from_count("singularity_exact", cfg.params.n as f64, k, total as usize, cfg.params, cfg.seed)
            } else if a.sample {
                singularity_mc(&cfg)?
            } else {
                singularity_probability(&cfg)?
            };
            emit(&[row], &a.out)
        }
        Command::Covariance(a) => {
            let cfg = config(&a)?;
            let c = covariance(&cfg)?;
            let n = cfg.params.n;
            let target = cfg.params.d as f64 / n as f64;
            let mut worst: f64 = 0.0;
            for i in 0..n {
                let line: Vec<String> = (0..n).map(|j| format!("{:8.4}", c.get(i, j))).collect();
                println!("{}", line.join(" "));
                for j in 0..n {
                    let want = if i == j { target } else { 0.0 };
                    worst = worst.max((c.get(i, j) - want).abs());
                }
            }
            println!("max |cov - (d/n) I| = {worst:.5}");
            Ok(EXIT_OK)
        }
        Command::Verify(a) => {
            let suite: Suite = a.suite.parse()?;
            let checks = run_suite(suite);
            for c in &checks {
                println!("{c}");
            }
            let failed = checks.iter().filter(|c| !c.pass).count();
            println!("{} checks, {failed} failed", checks.len());
            Ok(if failed == 0 { EXIT_OK } else { EXIT_VERIFY })
        }
    }
}

fn seed_or_generate(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s: u64 = rand::random();
        eprintln!("seed: {s}");
        s
    })
}

/// Build a config from `--config` (if any) with explicit flags on top.
fn config(c: &CommonArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str(&text).map_err(|e| Error::Format {
                path: path.clone(),
                message: e.to_string(),
            })?
        }
        None => {
            let n = c.n.ok_or_else(|| Error::InvalidParams("--n is required".into()))?;
            ExperimentConfig::new(EnsembleParams { n, d: n / 2 }, 1000, 0)
        }
    };
    if let Some(n) = c.n {
        cfg.params.n = n;
        cfg.params.d = n / 2;
    }
    if let Some(d) = c.d {
        cfg.params.d = d;
    }
    if let Some(r) = c.reps {
        cfg.reps = r;
    }
    if c.config.is_none() || c.seed.is_some() {
        cfg.seed = seed_or_generate(c.seed);
    }
    if c.workers.is_some() {
        cfg.workers = c.workers;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn grid_config(c: &CommonArgs, grid: Option<&str>) -> Result<ExperimentConfig> {
    let mut cfg = config(c)?;
    if let Some(g) = grid {
        cfg.eps_grid = parse_grid(g)?;
    }
    if cfg.eps_grid.is_empty() {
        return Err(Error::InvalidParams("--eps-grid is required".into()));
    }
    cfg.validate()?;
    Ok(cfg)
}

/// `start:stop:count`, endpoints included.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Error::Parse(format!("grid {s:?} must be start:stop:count"));
    let [a, b, k] = parts.as_slice() else {
        return Err(bad());
    };
    let start: f64 = a.trim().parse().map_err(|_| bad())?;
    let stop: f64 = b.trim().parse().map_err(|_| bad())?;
    let count: usize = k.trim().parse().map_err(|_| bad())?;
    if count == 0 || (count > 1 && stop <= start) {
        return Err(bad());
    }
    Ok(linspace(start, stop, count))
}

pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad number {x:?} in {s:?}"))))
        .collect()
}

/// Resolve `random`, `basis:k` (1-based) or `file:PATH` to a vector of length `n`.
pub fn parse_vector(spec: &str, n: usize, seed: u64, normalize_file: bool) -> Result<Vec<f64>> {
    if spec == "random" {
        return Ok(random_unit_vector(n, &mut derive_stream(seed, &["vector".into()])));
    }
    if let Some(k) = spec.strip_prefix("basis:") {
        let k: usize = k.parse().map_err(|_| Error::Parse(format!("bad basis index in {spec:?}")))?;
        if k == 0 || k > n {
            return Err(Error::InvalidParams(format!("basis index {k} outside 1..={n}")));
        }
        let mut v = vec![0.0; n];
        v[k - 1] = 1.0;
        return Ok(v);
    }
    if let Some(path) = spec.strip_prefix("file:") {
        return read_vector(Path::new(path), n, normalize_file);
    }
    Err(Error::Parse(format!("vector {spec:?} must be random, basis:k or file:PATH")))
}

fn read_vector(path: &Path, n: usize, normalize_it: bool) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let v = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>().map_err(|_| Error::Format {
                path: path.to_path_buf(),
                message: format!("not a number: {t:?}"),
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    if v.len() != n {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!("{} entries, expected {n}", v.len()),
        });
    }
    if !normalize_it {
        return Ok(v);
    }
    normalize(&v).ok_or(Error::ZeroDirection)
}

fn emit(rows: &[ResultRow], out: &OutArgs) -> Result<i32> {
    println!(
        "{:<20} {:>10} {:>10} {:>10} {:>8} {:>5} {:>5}",
        "experiment", "x", "estimate", "stderr", "reps", "n", "d"
    );
    for r in rows {
        println!(
            "{:<20} {:>10.4} {:>10.6} {:>10.6} {:>8} {:>5} {:>5}",
            r.experiment, r.x, r.estimate, r.stderr, r.reps, r.n, r.d
        );
    }
    if let Some(path) = &out.out {
        let format = out.format.map(OutputFormat::from).unwrap_or_default();
        write_rows(rows, path, format, false)?;
    }
    Ok(EXIT_OK)
}

fn sample(a: SampleArgs) -> Result<i32> {
    let cfg = config(&a.common)?;
    let m = a.m.unwrap_or(cfg.params.n);
    let reps = a.common.reps.unwrap_or(1);
    let mut text = String::new();
    for i in 0..reps {
        if i > 0 {
            text.push('\n');
        }
        let mat: SignedMatrix = sample_indexed(cfg.params, m, cfg.seed, i);
        text.push_str(&mat.to_csv());
    }
    match &a.out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::io(path, e))?,
        None => print!("{text}"),
    }
    Ok(EXIT_OK)
}

fn spectrum(a: SpectrumArgs) -> Result<i32> {
    let mut cfg = config(&a.common)?;
    if let Some(spec) = &a.vector {
        let v = parse_vector(spec, cfg.params.n, cfg.seed, !a.no_normalize)?;
        let mode = match a.side {
            SideArg::Right => SmallBallMode::Right,
            SideArg::Left => SmallBallMode::Left,
        };
        return emit(&[fixed_vector_smallball(&cfg, &v, mode, a.scale)?], &a.out);
    }
    if let Some(g) = &a.t_grid {
        cfg.t_grid = parse_grid(g)?;
        cfg.validate()?;
        return emit(&operator_norm_tail(&cfg)?, &a.out);
    }
    let m = a.m.unwrap_or(cfg.params.n);
    let reps = a.common.reps.unwrap_or(1);
    let mut csv = String::from("replica,smallest,largest,hs_norm\n");
    println!("{:>8} {:>14} {:>14} {:>14}", "replica", "s_min", "s_max", "hs_norm");
    for i in 0..reps {
        let s = singular_values(&sample_indexed(cfg.params, m, cfg.seed, i).to_f64())?;
        println!("{i:>8} {:>14.6e} {:>14.6} {:>14.6}", s.smallest, s.largest, s.hs_norm);
        csv.push_str(&format!("{i},{},{},{}\n", s.smallest, s.largest, s.hs_norm));
    }
    if let Some(path) = &a.out.out {
        std::fs::write(path, csv).map_err(|e| Error::io(path, e))?;
    }
    Ok(EXIT_OK)
}

fn clcd(a: ClcdArgs) -> Result<i32> {
    let n = a.common.n.ok_or_else(|| Error::InvalidParams("--n is required".into()))?;
    let seed = if a.vector == "random" { seed_or_generate(a.common.seed) } else { a.common.seed.unwrap_or(0) };
    let v = parse_vector(&a.vector, n, seed, !a.no_normalize)?;
    let delta = a.delta.unwrap_or(crate::experiments::DEFAULT_DELTA);
    let rho = a.rho.unwrap_or(crate::experiments::DEFAULT_RHO);
    let gamma = a.gamma.unwrap_or(delta * rho / 13.0);
    let theta_max = a.theta_max.unwrap_or(4.0 * (delta * n as f64).sqrt() / 7.0);
    let w_norm = difference_vector(&v)?.norm();
    let step = a.grid_step.unwrap_or(1e-4 / w_norm);
    let query = ClcdQuery::new(a.alpha, gamma, theta_max, step)?;
    let result = match &a.pair {
        Some(pq) => {
            let (p, q) = pq
                .split_once(':')
                .and_then(|(p, q)| Some((p.parse::<usize>().ok()?, q.parse::<usize>().ok()?)))
                .ok_or_else(|| Error::Parse(format!("--pair {pq:?} must be P:Q")))?;
            pair_clcd_scan(p, q, &v, &query)?
        }
        None => clcd_scan(&v, &query)?,
    };
    let dir = Direction::plain(difference_vector(&v)?.entries);
    println!("|D(v)| = {:.6}  |D(v)|_inf = {:.6}", dir.norm(), dir.max_abs());
    println!("alpha = {}  gamma = {gamma}  theta_max = {theta_max}  h = {step:e}", a.alpha);
    println!("{}", serde_json::to_string(&result.outcome).expect("outcome serializes"));
    println!("certified lower bound: {}", result.certified_lower_bound());
    Ok(EXIT_OK)
}

fn levy(a: LevyArgs) -> Result<i32> {
    let n = a.common.n.ok_or_else(|| Error::InvalidParams("--n is required".into()))?;
    let params = EnsembleParams::new(n, a.common.d.unwrap_or(n / 2))?;
    let needs_seed = a.vector == "random" || !a.exact;
    let seed = if needs_seed { seed_or_generate(a.common.seed) } else { a.common.seed.unwrap_or(0) };
    let v = parse_vector(&a.vector, n, seed, !a.no_normalize)?;
    let eps = match &a.eps_grid {
        Some(g) => parse_grid(g)?,
        None => parse_list(&a.eps)?,
    };
    let estimates: Vec<LevyEstimate> = if a.exact {
        let dist = enumerate_wv(&v, params)?;
        eps.iter().map(|&e| levy_exact(&dist, e)).collect::<Result<_>>()?
    } else {
        let samples = a.common.reps.unwrap_or(100_000);
        levy_mc_grid(&v, params, &eps, samples, &mut derive_stream(seed, &["levy".into()]))?
    };
    println!("{:>10} {:>12} {:>12} {:>10}", "eps", "L(W_v,eps)", "ci", "method");
    for e in &estimates {
        println!(
            "{:>10.4} {:>12.8} {:>12.6} {:>10}",
            e.epsilon,
            e.estimate,
            e.ci_halfwidth,
            if a.exact { "exact" } else { "mc" }
        );
    }
    if let Some(path) = &a.out.out {
        let reps = if a.exact {
            params.row_count().map_or(usize::MAX, |c| c as usize)
        } else {
            a.common.reps.unwrap_or(100_000)
        };
        let rows: Vec<ResultRow> = estimates
            .iter()
            .map(|e| ResultRow {
                experiment: if a.exact { "levy_exact" } else { "levy_mc" }.into(),
                x: e.epsilon,
                estimate: e.estimate,
                stderr: crate::experiments::binomial_stderr(e.estimate, reps),
                reps,
                n: params.n,
                d: params.d,
                seed,
            })
            .collect();
        write_rows(&rows, path, a.out.format.map(OutputFormat::from).unwrap_or_default(), false)?;
    }
    Ok(EXIT_OK)
}
