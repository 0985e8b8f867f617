use signed_rmt::ensemble::EnsembleParams;
use signed_rmt::experiments::{
    binomial_stderr, decreasing_trend, distance_tail, fixed_vector_smallball, operator_norm_samples, operator_norm_tail,
    singularity_probability, ExperimentConfig, SmallBallMode,
};

fn cfg(n: usize, reps: usize, seed: u64) -> ExperimentConfig {
    ExperimentConfig::new(EnsembleParams::half(n).unwrap(), reps, seed)
}

/// `P(Bin(n, 1/2) <= k)`.
fn binomial_cdf_half(n: u32, k: u32) -> f64 {
    let mut c = 1.0f64;
    let mut acc = 0.0;
    for i in 0..=k.min(n) {
        if i > 0 {
            c = c * (n - i + 1) as f64 / i as f64;
        }
        acc += c;
    }
    acc / 2f64.powi(n as i32)
}

#[test]
fn singularity_decreases_with_n() {
    let rows: Vec<_> = [4, 6, 8, 10, 12]
        .iter()
        .map(|&n| singularity_probability(&cfg(n, 20_000, 3)).unwrap())
        .collect();
    assert_eq!(rows[0].experiment, "singularity_exact");
    let trend = decreasing_trend(&rows);
    assert!(trend.decreasing, "{rows:?}");
    for r in &rows {
        assert_eq!(r.stderr, binomial_stderr(r.estimate, r.reps));
    }
}

#[test]
fn operator_norm_range_and_monotonicity() {
    let c = cfg(128, 200, 4).with_t_grid(vec![0.0, 1.0, 1.2, 1.5, 2.0]);
    let s = operator_norm_samples(&c).unwrap();
    let root = (128f64).sqrt();
    assert!(s.iter().all(|x| (1.0..=2.0).contains(&(x / root))));
    let rows = operator_norm_tail(&c).unwrap();
    assert_eq!(rows[0].estimate, 1.0);
    assert!(rows.windows(2).all(|w| w[1].estimate <= w[0].estimate));
}

#[test]
fn fixed_vector_right_matches_binomial_oracle() {
    // ||M e_1||^2 is the weight of the first column, Bin(n, 1/2); at scale 1/2 the
    // event is weight <= n/4.
    let mut logs = Vec::new();
    for n in [8usize, 16, 24] {
        let mut e1 = vec![0.0; n];
        e1[0] = 1.0;
        let row = fixed_vector_smallball(&cfg(n, 40_000, 6), &e1, SmallBallMode::Right, Some(0.5)).unwrap();
        let want = binomial_cdf_half(n as u32, n as u32 / 4);
        assert!((row.estimate - want).abs() <= 4.0 * binomial_stderr(want, row.reps), "n={n}: {} vs {want}", row.estimate);
        logs.push(row.estimate.ln());
    }
    assert!(logs[1] < logs[0] && logs[2] < logs[1]);
    let (d1, d2) = (logs[0] - logs[1], logs[1] - logs[2]);
    assert!(d1 / d2 > 0.5 && d1 / d2 < 2.0, "log-frequency steps {d1}, {d2}");
}

#[test]
fn fixed_vector_default_thresholds() {
    let mut e1 = vec![0.0; 16];
    e1[0] = 1.0;
    let right = fixed_vector_smallball(&cfg(16, 2000, 1), &e1, SmallBallMode::Right, None).unwrap();
    assert_eq!(right.x, 0.25);
    let left = fixed_vector_smallball(&cfg(16, 2000, 1), &e1, SmallBallMode::Left, None).unwrap();
    assert!((left.x - 1.0 / 36.0).abs() < 1e-15);
    // e_1^T M is a single row of norm sqrt(d) = sqrt 8 > sqrt(16)/36.
    assert_eq!(left.estimate, 0.0);
}

#[test]
fn distance_saturates_at_row_norm() {
    let c = cfg(12, 300, 8).with_eps_grid(vec![0.1, 6f64.sqrt()]);
    let rep = distance_tail(&c).unwrap();
    assert_eq!(rep.rows[1].estimate, 1.0);
    assert!(rep.max_identity_error < 1e-10);
    assert_eq!(rep.inner_products.len(), rep.distances.len());
}
