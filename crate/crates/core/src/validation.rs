//! Statistical checks of simulator output against known distributional facts.
//! Each check returns its statistic, the threshold it was held to, and a verdict.

use serde::Serialize;

use crate::distributions::{gumbel_cdf, gumbel_quantile, std_normal_cdf};
use crate::error::{Error, Result};
use crate::pointprocess::SamplingMeasure;
use crate::rng::replication_seed;
use crate::simulator::{simulate_naive_with, FieldSample, SimConfig, Simulator};
use crate::sites::SiteSet;
use crate::stats::{
    ks_critical_1pct, ks_statistic, ks_two_sample, ks_two_sample_critical_1pct, qq_data,
};
use crate::variogram::VariogramModel;
use crate::VERSION;

pub const CHECK_NAMES: [&str; 5] = [
    "marginal",
    "bivariate",
    "mu_invariance",
    "stationarity",
    "determinism",
];

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn at_most(name: &str, statistic: f64, threshold: f64, detail: String) -> Self {
        Self {
            name: name.to_string(),
            statistic,
            threshold,
            passed: statistic <= threshold,
            detail,
        }
    }
}

fn line(xs: &[f64]) -> Result<SiteSet> {
    SiteSet::from_flat(xs.to_vec(), 1)
}

fn run(
    sites: &SiteSet,
    model: &VariogramModel,
    measure: Option<SamplingMeasure>,
    reps: usize,
    seed: u64,
) -> Result<Vec<FieldSample>> {
    if reps == 0 {
        return Err(Error::usage("reps must be at least 1"));
    }
    Simulator::new(sites, model, measure, SimConfig::default())?.simulate_reps(seed, reps)
}

fn column(samples: &[FieldSample], j: usize) -> Vec<f64> {
    samples.iter().map(|s| s.values[j]).collect()
}

fn maxima(samples: &[FieldSample]) -> Vec<f64> {
    samples
        .iter()
        .map(|s| s.values.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect()
}

/// KS of the one-site marginal against the standard Gumbel law.
pub fn check_marginal(
    model: &VariogramModel,
    site: &[f64],
    reps: usize,
    seed: u64,
) -> Result<CheckResult> {
    let sites = SiteSet::from_points(vec![site.to_vec()])?;
    let xs = column(&run(&sites, model, None, reps, seed)?, 0);
    let d = ks_statistic(&xs, |x| gumbel_cdf(x, 0.0))?;
    Ok(CheckResult::at_most(
        "marginal",
        d,
        ks_critical_1pct(reps),
        format!("KS vs Gumbel at site {site:?}, {reps} reps"),
    ))
}

/// Location of `max(eta(0), eta(s))`: `log(2 Phi(sqrt(gamma(s) / 2)))`.
pub fn bivariate_max_location(model: &VariogramModel, s: &[f64]) -> Result<f64> {
    let lambda = (model.gamma(s)? / 2.0).sqrt();
    Ok((2.0 * std_normal_cdf(lambda)).ln())
}

/// KS of `max(eta(0), eta(s)) - log(2 Phi(lambda))` against the standard Gumbel
/// law. Also returns the Q-Q pairs of the centred maxima.
pub fn check_bivariate(
    model: &VariogramModel,
    s: f64,
    reps: usize,
    seed: u64,
) -> Result<(CheckResult, Vec<(f64, f64)>)> {
    let sites = line(&[0.0, s])?;
    let loc = bivariate_max_location(model, &[s])?;
    let xs: Vec<f64> = maxima(&run(&sites, model, None, reps, seed)?)
        .into_iter()
        .map(|m| m - loc)
        .collect();
    let d = ks_statistic(&xs, |x| gumbel_cdf(x, 0.0))?;
    let qq = qq_data(&xs, gumbel_quantile)?;
    Ok((
        CheckResult::at_most(
            "bivariate",
            d,
            ks_critical_1pct(reps),
            format!("KS of max(eta(0), eta({s})) - {loc:.6} vs Gumbel, {reps} reps"),
        ),
        qq,
    ))
}

/// Two-sample KS of the site-wise maximum under uniform versus skewed weights.
pub fn check_mu_invariance(
    model: &VariogramModel,
    sites: &SiteSet,
    weights: &[f64],
    reps: usize,
    seed: u64,
) -> Result<CheckResult> {
    let uniform = maxima(&run(sites, model, None, reps, replication_seed(seed, 101))?);
    let skewed = SamplingMeasure::from_weights(weights)?;
    let other = maxima(&run(
        sites,
        model,
        Some(skewed),
        reps,
        replication_seed(seed, 102),
    )?);
    let d = ks_two_sample(&uniform, &other)?;
    Ok(CheckResult::at_most(
        "mu_invariance",
        d,
        ks_two_sample_critical_1pct(reps, reps),
        format!(
            "two-sample KS of max over {} sites, weights {weights:?}",
            sites.len()
        ),
    ))
}

/// Two-sample KS of every marginal and of the maximum on `sites` versus
/// `sites + shift`. The reported statistic is the largest ratio of distance
/// to critical value; each comparison is held to its own 1% level.
pub fn check_stationarity(
    model: &VariogramModel,
    sites: &SiteSet,
    shift: &[f64],
    reps: usize,
    seed: u64,
) -> Result<CheckResult> {
    let moved = sites.translated(shift)?;
    let a = run(sites, model, None, reps, replication_seed(seed, 201))?;
    let b = run(&moved, model, None, reps, replication_seed(seed, 202))?;
    let crit = ks_two_sample_critical_1pct(reps, reps);
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for j in 0..sites.len() {
        let d = ks_two_sample(&column(&a, j), &column(&b, j))?;
        worst = worst.max(d / crit);
        parts.push(format!("site{j}={d:.5}"));
    }
    let d = ks_two_sample(&maxima(&a), &maxima(&b))?;
    worst = worst.max(d / crit);
    parts.push(format!("max={d:.5}"));
    Ok(CheckResult::at_most(
        "stationarity",
        worst,
        1.0,
        format!(
            "shift {shift:?}, alpha {}: {} (critical {crit:.5})",
            model.alpha(),
            parts.join(" ")
        ),
    ))
}

/// Counts runs whose values or cluster counts differ between 1 and `workers`
/// parallel workers.
pub fn check_determinism(
    model: &VariogramModel,
    sites: &SiteSet,
    workers: usize,
    runs: usize,
    seed: u64,
) -> Result<CheckResult> {
    let single = Simulator::new(sites, model, None, SimConfig::with_workers(1))?;
    let multi = Simulator::new(sites, model, None, SimConfig::with_workers(workers))?;
    let mut mismatches = 0usize;
    for r in 0..runs {
        let s = replication_seed(seed, r as u64);
        let a = single.simulate(s)?;
        let b = multi.simulate(s)?;
        let same = a.num_clusters == b.num_clusters
            && a.values
                .iter()
                .map(|x| x.to_bits())
                .eq(b.values.iter().map(|x| x.to_bits()));
        if !same {
            mismatches += 1;
        }
    }
    Ok(CheckResult::at_most(
        "determinism",
        mismatches as f64,
        0.0,
        format!("K=1 vs K={workers}, {runs} runs on {} sites", sites.len()),
    ))
}

/// KS of the truncated baseline's marginal at `site_index` against Gumbel.
/// Passes when the baseline is REJECTED at the 1% level.
pub fn check_naive_rejected(
    model: &VariogramModel,
    sites: &SiteSet,
    site_index: usize,
    truncation: u64,
    reps: usize,
    seed: u64,
) -> Result<CheckResult> {
    let fg = crate::gauss::FactorizedGaussian::build(sites, model)?;
    let xs = (0..reps)
        .map(|r| {
            simulate_naive_with(&fg, replication_seed(seed, r as u64), truncation)
                .map(|s| s.values[site_index])
        })
        .collect::<Result<Vec<f64>>>()?;
    let d = ks_statistic(&xs, |x| gumbel_cdf(x, 0.0))?;
    let crit = ks_critical_1pct(reps);
    Ok(CheckResult {
        name: "naive_bias".into(),
        statistic: d,
        threshold: crit,
        passed: d > crit,
        detail: format!(
            "truncation N={truncation}, site {:?}",
            sites.point(site_index)
        ),
    })
}

/// KS of the exact simulator's marginal at one site of a larger set.
pub fn check_marginal_in_set(
    model: &VariogramModel,
    sites: &SiteSet,
    site_index: usize,
    reps: usize,
    seed: u64,
) -> Result<CheckResult> {
    let xs = column(&run(sites, model, None, reps, seed)?, site_index);
    let d = ks_statistic(&xs, |x| gumbel_cdf(x, 0.0))?;
    Ok(CheckResult::at_most(
        "marginal",
        d,
        ks_critical_1pct(reps),
        format!(
            "KS vs Gumbel at site {:?} of {}",
            sites.point(site_index),
            sites.len()
        ),
    ))
}

#[derive(Clone, Debug)]
pub struct ValidationConfig {
    pub alpha: f64,
    pub scale: f64,
    /// Lag of the bivariate check.
    pub s: f64,
    pub reps: usize,
    pub seed: u64,
    pub workers: usize,
    pub skip: Vec<String>,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            scale: 1.0,
            s: 1.0 - 1.0 / 1024.0,
            reps: 10_000,
            seed: 1,
            workers: 8,
            skip: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub seed: u64,
    pub alpha: f64,
    pub n: usize,
    pub reps: usize,
    pub version: &'static str,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

/// Q-Q pairs of the bivariate check, when it ran.
pub type QqPairs = Option<Vec<(f64, f64)>>;

/// Runs every check not listed in `skip`. Returns the report and, if the
/// bivariate check ran, its Q-Q pairs.
pub fn run_validation(cfg: &ValidationConfig) -> Result<(ValidationReport, QqPairs)> {
    if cfg.reps == 0 {
        return Err(Error::usage("reps must be at least 1"));
    }
    if let Some(bad) = cfg.skip.iter().find(|s| !CHECK_NAMES.contains(&s.as_str())) {
        return Err(Error::usage(format!(
            "unknown check `{bad}`; expected one of {CHECK_NAMES:?}"
        )));
    }
    let model = VariogramModel::fractional(cfg.alpha, cfg.scale, 1)?;
    let five = line(&[0.0, 0.2, 0.45, 0.7, 1.0])?;
    let wants = |name: &str| !cfg.skip.iter().any(|s| s == name);
    let mut checks = Vec::new();
    let mut qq = None;
    let mut n = 0usize;

    if wants("marginal") {
        checks.push(check_marginal(&model, &[0.7], cfg.reps, cfg.seed)?);
        n = n.max(1);
    }
    if wants("bivariate") {
        let (c, pairs) = check_bivariate(&model, cfg.s, cfg.reps, replication_seed(cfg.seed, 1))?;
        checks.push(c);
        qq = Some(pairs);
        n = n.max(2);
    }
    if wants("mu_invariance") {
        checks.push(check_mu_invariance(
            &model,
            &five,
            &[0.6, 0.1, 0.1, 0.1, 0.1],
            cfg.reps,
            replication_seed(cfg.seed, 2),
        )?);
        n = n.max(five.len());
    }
    if wants("stationarity") {
        let s = line(&[0.0, 0.5, 1.0])?;
        checks.push(check_stationarity(
            &model,
            &s,
            &[10.0],
            cfg.reps,
            replication_seed(cfg.seed, 3),
        )?);
        n = n.max(s.len());
    }
    if wants("determinism") {
        let grid = SiteSet::line(0.0, 1.0, 1.0 / 32.0)?;
        checks.push(check_determinism(
            &model,
            &grid,
            cfg.workers.max(2),
            100,
            replication_seed(cfg.seed, 4),
        )?);
        n = n.max(grid.len());
    }

    let passed = checks.iter().all(|c| c.passed);
    Ok((
        ValidationReport {
            seed: cfg.seed,
            alpha: cfg.alpha,
            n,
            reps: cfg.reps,
            version: VERSION,
            passed,
            checks,
        },
        qq,
    ))
}
