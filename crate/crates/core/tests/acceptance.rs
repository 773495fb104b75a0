//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//! Run with `cargo test -p brsim --test acceptance -- --nocapture` to see them.

use brsim::distributions::{bivariate_neglog, fdd_cdf_oracle};
use brsim::rng::RandomStream;
use brsim::stats::{coupled_set_estimates, extremal_index_estimate, set_function_estimate};
use brsim::svg::emit_svg_qq;
use brsim::validation::{
    check_bivariate, check_determinism, check_marginal, check_marginal_in_set, check_mu_invariance,
    check_naive_rejected, check_stationarity, CheckResult,
};
use brsim::{change_of_measure_check, SimConfig, Simulator, SiteSet, VariogramModel};

const REPS: usize = 10_000;

fn model(alpha: f64) -> VariogramModel {
    VariogramModel::fractional(alpha, 1.0, 1).unwrap()
}

fn line(xs: &[f64]) -> SiteSet {
    SiteSet::from_flat(xs.to_vec(), 1).unwrap()
}

fn report(id: u32, title: &str, passed: bool, detail: String) {
    println!(
        "[criterion {id:>2}] {:<4} {title}: {detail}",
        if passed { "PASS" } else { "FAIL" }
    );
    assert!(passed, "criterion {id} ({title}) failed: {detail}");
}

fn report_check(id: u32, title: &str, c: &CheckResult) {
    report(
        id,
        title,
        c.passed,
        format!(
            "statistic {:.6} vs threshold {:.6} ({})",
            c.statistic, c.threshold, c.detail
        ),
    );
}

#[test]
fn c01_marginal_gumbel() {
    let c = check_marginal(&model(1.0), &[0.7], REPS, 101).unwrap();
    assert_eq!(c.threshold, 0.0163);
    report_check(1, "single-site marginal is standard Gumbel", &c);
}

#[test]
fn c02_bivariate_dependence() {
    let s = 1.0 - 1.0 / 1024.0;
    let (c, qq) = check_bivariate(&model(1.0), s, REPS, 202).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("qq.svg");
    emit_svg_qq(&qq, &path).unwrap();
    assert!(std::fs::metadata(&path).unwrap().len() > 0);
    // interior 98% of the Q-Q pairs stay near the diagonal
    let lo = qq.len() / 100;
    let dev = qq[lo..qq.len() - lo]
        .iter()
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(dev <= 0.2, "interior Q-Q deviation {dev}");
    report_check(
        2,
        "max(eta(0), eta(s)) - log(2 Phi(sqrt(s)/2)) is Gumbel",
        &c,
    );
}

#[test]
fn c03_bivariate_formula_vs_oracle() {
    let m = model(1.0);
    let est = fdd_cdf_oracle(&line(&[0.0, 1.0]), &m, &[0.0, 1.0], 1_000_000, 303).unwrap();
    let closed = (-bivariate_neglog(&m, &[1.0], 0.0, 1.0).unwrap()).exp();
    let z = (est.value - closed) / est.std_error;
    report(
        3,
        "closed-form bivariate CDF matches the Monte Carlo oracle",
        z.abs() <= 3.0,
        format!(
            "oracle {:.6} +- {:.6}, closed form {closed:.6}, z = {z:.3}",
            est.value, est.std_error
        ),
    );
}

/// Stopping rule computed from raw exponential spacings only.
fn stopping_rule_count(n: usize, stream: &mut RandomStream) -> u64 {
    let ln_n = (n as f64).ln();
    let mut g = stream.exponential();
    let v1 = -g.ln();
    let mut m = 1;
    loop {
        m += 1;
        g += stream.exponential();
        if -g.ln() + ln_n < v1 {
            return m;
        }
    }
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

#[test]
fn c04_degenerate_cluster_counts() {
    let n = 16;
    let sim = Simulator::new(&line(&[0.4; 16]), &model(1.0), None, SimConfig::default()).unwrap();
    let counts: Vec<f64> = sim
        .simulate_reps(404, REPS)
        .unwrap()
        .iter()
        .map(|s| s.num_clusters as f64)
        .collect();
    let mut stream = RandomStream::new(4040, 0);
    let oracle: Vec<f64> = (0..REPS)
        .map(|_| stopping_rule_count(n, &mut stream) as f64)
        .collect();
    let (m1, v1) = mean_var(&counts);
    let (m2, v2) = mean_var(&oracle);
    let sigma = (v1 / REPS as f64 + v2 / REPS as f64).sqrt();

    let single = Simulator::new(&line(&[0.4]), &model(1.0), None, SimConfig::default()).unwrap();
    let all_two = single
        .simulate_reps(405, REPS)
        .unwrap()
        .iter()
        .all(|s| s.num_clusters == 2);

    report(
        4,
        "identical-site cluster counts follow the stopping rule",
        (m1 - m2).abs() <= 4.0 * sigma && all_two,
        format!(
            "mean {m1:.4} vs oracle {m2:.4} (4 sigma = {:.4}); n=1 count always 2: {all_two}",
            4.0 * sigma
        ),
    );
}

#[test]
fn c05_measure_invariance() {
    let sites = line(&[0.0, 0.2, 0.45, 0.7, 1.0]);
    let c =
        check_mu_invariance(&model(1.0), &sites, &[0.6, 0.1, 0.1, 0.1, 0.1], REPS, 505).unwrap();
    report_check(
        5,
        "law of the maximum does not depend on the anchor measure",
        &c,
    );
}

#[test]
fn c06_stationarity() {
    let sites = line(&[0.0, 0.3, 0.65, 1.0]);
    for (i, alpha) in [1.0, 2.0].into_iter().enumerate() {
        let c = check_stationarity(&model(alpha), &sites, &[10.0], REPS, 606 + i as u64).unwrap();
        report_check(
            6,
            &format!("shift by 10 leaves the law unchanged (alpha={alpha})"),
            &c,
        );
    }
}

#[test]
fn c07_change_of_measure() {
    let grid = line(&[0.0, 0.5, 1.0]);
    for (alpha, anchor, seed) in [(1.0, 0.5, 707), (2.0, 0.5, 708), (2.0, 1.0, 709)] {
        let r = change_of_measure_check(&model(alpha), &grid, &[anchor], 1_000_000, seed).unwrap();
        report(
            7,
            &format!("change-of-measure identity (alpha={alpha}, t={anchor})"),
            r.z_score.abs() <= 3.0,
            format!("lhs {:.5} rhs {:.5} z = {:.3}", r.lhs, r.rhs, r.z_score),
        );
    }
}

#[test]
fn c08_pickands_properties() {
    let m = model(1.0);
    let mesh = 1.0 / 32.0;

    let grid = SiteSet::line(0.0, 2.0, mesh).unwrap();
    let first: Vec<usize> = (0..=32).collect();
    let second: Vec<usize> = (32..=64).collect();
    let all: Vec<usize> = (0..=64).collect();
    let est = coupled_set_estimates(&m, &grid, &[all, first, second], 100_000, 808).unwrap();
    let (f02, f01, f12) = (est[0].value, est[1].value, est[2].value);
    report(
        8,
        "coupled subadditivity f([0,2]) <= f([0,1]) + f([1,2]) and <= 2 f([0,1])",
        f02 <= f01 + f12 && f02 <= 2.0 * f01,
        format!("f([0,2]) = {f02:.4}, f([0,1]) = {f01:.4}, f([1,2]) = {f12:.4}"),
    );

    let a =
        set_function_estimate(&m, &SiteSet::line(0.0, 1.0, mesh).unwrap(), 100_000, 809).unwrap();
    let b =
        set_function_estimate(&m, &SiteSet::line(3.0, 4.0, mesh).unwrap(), 100_000, 810).unwrap();
    let se = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
    report(
        8,
        "translation invariance f([0,1]) = f([3,4])",
        (a.value - b.value).abs() <= 3.0 * se,
        format!(
            "{:.4} +- {:.4} vs {:.4} +- {:.4}",
            a.value, a.std_error, b.value, b.std_error
        ),
    );

    let theta = extremal_index_estimate(&m, 64, 100_000, 811).unwrap();
    report(
        8,
        "extremal index estimate at n=64 lies in [0, 1 + 3 SE]",
        theta.value >= 0.0 && theta.value <= 1.0 + 3.0 * theta.std_error,
        format!("theta = {:.4} +- {:.4}", theta.value, theta.std_error),
    );
}

#[test]
fn c09_parallel_determinism() {
    let grid = SiteSet::line(0.0, 1.0, 1.0 / 32.0).unwrap();
    let c = check_determinism(&model(1.0), &grid, 8, 100, 909).unwrap();
    report_check(9, "K=1 and K=8 workers give bit-identical samples", &c);
}

#[test]
fn c10_naive_truncation_bias() {
    let sites = SiteSet::line(0.0, 10.0, 1.0).unwrap();
    let far = sites.len() - 1;
    let naive = check_naive_rejected(&model(1.0), &sites, far, 5, REPS, 1010).unwrap();
    report_check(
        10,
        "truncated baseline (N=5) is rejected at the far site",
        &naive,
    );
    let exact = check_marginal_in_set(&model(1.0), &sites, far, REPS, 1011).unwrap();
    report_check(10, "exact simulator passes at the far site", &exact);
}
