//! Goodness-of-fit statistics, Q-Q data, and the Monte Carlo estimators of
//! Pickands-type constants.

use serde::Serialize;

use crate::distributions::ZField;
use crate::error::{Error, Result};
use crate::rng::{mc_moments_multi, mean_and_se};
use crate::sites::SiteSet;
use crate::variogram::VariogramModel;

/// Largest grid the estimators will factorize.
pub const MAX_GRID_POINTS: usize = 4096;

/// Asymptotic Kolmogorov-Smirnov coefficient at the 1% level.
pub const KS_COEFF_1PCT: f64 = 1.63;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EstimateWithError {
    pub value: f64,
    pub std_error: f64,
    pub reps: usize,
}

impl EstimateWithError {
    fn from_moments(sum: f64, sum_sq: f64, reps: usize, scale: f64) -> Self {
        let (m, se) = mean_and_se(sum, sum_sq, reps);
        Self {
            value: m * scale,
            std_error: se * scale,
            reps,
        }
    }
}

fn sorted(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::Empty("samples"));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::usage("samples contain NaN"));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    Ok(xs)
}

/// One-sample Kolmogorov-Smirnov distance `sup |F_N - F|`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    let xs = sorted(samples)?;
    let n = xs.len() as f64;
    Ok(xs.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        let above = (i + 1) as f64 / n - f;
        let below = f - i as f64 / n;
        d.max(above).max(below)
    }))
}

/// Two-sample Kolmogorov-Smirnov distance between empirical CDFs.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    let xa = sorted(a)?;
    let xb = sorted(b)?;
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// 1% critical value of the one-sample statistic for `n` samples.
pub fn ks_critical_1pct(n: usize) -> f64 {
    KS_COEFF_1PCT / (n as f64).sqrt()
}

/// 1% critical value of the two-sample statistic.
pub fn ks_two_sample_critical_1pct(n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    KS_COEFF_1PCT * ((n + m) / (n * m)).sqrt()
}

/// Sorted samples paired with the theoretical quantiles at `(k - 0.5) / N`,
/// as `(theoretical, empirical)`.
pub fn qq_data(samples: &[f64], quantile_fn: impl Fn(f64) -> f64) -> Result<Vec<(f64, f64)>> {
    let xs = sorted(samples)?;
    let n = xs.len() as f64;
    Ok(xs
        .into_iter()
        .enumerate()
        .map(|(k, x)| (quantile_fn((k as f64 + 0.5) / n), x))
        .collect())
}

/// Type-7 (linear interpolation) sample quantile of sorted data.
pub fn quantile_sorted(xs: &[f64], p: f64) -> f64 {
    let h = (xs.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    xs[lo] + (h - lo as f64) * (xs[hi] - xs[lo])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HistogramBin {
    /// Inclusive lower edge.
    pub lo: u64,
    /// Exclusive upper edge.
    pub hi: u64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClusterSummary {
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub mean: f64,
    pub min: u64,
    pub max: u64,
    pub count: usize,
    pub histogram: Vec<HistogramBin>,
}

/// Quartiles, mean and a fixed-width histogram with at most `bins` bins.
pub fn cluster_count_stats(counts: &[u64], bins: usize) -> Result<ClusterSummary> {
    if counts.is_empty() {
        return Err(Error::Empty("cluster counts"));
    }
    let bins = bins.max(1) as u64;
    let mut xs = counts.to_vec();
    xs.sort_unstable();
    let fx: Vec<f64> = xs.iter().map(|&c| c as f64).collect();
    let (min, max) = (xs[0], xs[xs.len() - 1]);
    let width = (max - min + 1).div_ceil(bins);
    let nbins = (max - min + 1).div_ceil(width);
    let mut histogram: Vec<HistogramBin> = (0..nbins)
        .map(|b| HistogramBin {
            lo: min + b * width,
            hi: min + (b + 1) * width,
            count: 0,
        })
        .collect();
    for &c in &xs {
        histogram[((c - min) / width) as usize].count += 1;
    }
    Ok(ClusterSummary {
        q25: quantile_sorted(&fx, 0.25),
        median: quantile_sorted(&fx, 0.5),
        q75: quantile_sorted(&fx, 0.75),
        mean: fx.iter().sum::<f64>() / fx.len() as f64,
        min,
        max,
        count: xs.len(),
        histogram,
    })
}

fn check_budget(sites: &SiteSet) -> Result<()> {
    if sites.len() > MAX_GRID_POINTS {
        return Err(Error::Resource(format!(
            "{} grid points exceed the factorization budget of {MAX_GRID_POINTS}",
            sites.len()
        )));
    }
    Ok(())
}

/// Estimates `E exp(max_{t in A} Z(t))` on each index subset `A` of `sites`,
/// all from the same draws of `Z` (anchored at the origin).
///
/// Coupling makes set inequalities hold pathwise: a superset never yields a
/// smaller estimate, and `f(A u B) <= f(A) + f(B)` exactly.
pub fn coupled_set_estimates(
    model: &VariogramModel,
    sites: &SiteSet,
    subsets: &[Vec<usize>],
    reps: usize,
    seed: u64,
) -> Result<Vec<EstimateWithError>> {
    check_budget(sites)?;
    if reps == 0 {
        return Err(Error::usage("reps must be at least 1"));
    }
    for s in subsets {
        if s.is_empty() {
            return Err(Error::Empty("subset"));
        }
        if let Some(&i) = s.iter().find(|&&i| i >= sites.len()) {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: sites.len(),
            });
        }
    }
    let z = ZField::new(sites, model)?;
    let moments = mc_moments_multi(reps, seed, subsets.len(), |stream, out| {
        let zs = z.sample(stream);
        for (o, s) in out.iter_mut().zip(subsets) {
            *o = s
                .iter()
                .map(|&i| zs[i])
                .fold(f64::NEG_INFINITY, f64::max)
                .exp();
        }
    });
    Ok(moments
        .into_iter()
        .map(|(s, q)| EstimateWithError::from_moments(s, q, reps, 1.0))
        .collect())
}

/// Estimates `f(A) = E exp(max_{t in A} Z(t))` over the finite set `A`.
pub fn set_function_estimate(
    model: &VariogramModel,
    sites: &SiteSet,
    reps: usize,
    seed: u64,
) -> Result<EstimateWithError> {
    let all: Vec<usize> = (0..sites.len()).collect();
    Ok(coupled_set_estimates(model, sites, &[all], reps, seed)?[0])
}

/// Grid over the box `[lower, upper]` with the given mesh in every dimension.
pub fn box_grid(lower: &[f64], upper: &[f64], mesh: f64) -> Result<SiteSet> {
    if lower.len() != upper.len() || lower.is_empty() {
        return Err(Error::usage(
            "box corners must have the same nonzero dimension",
        ));
    }
    let expr: Vec<String> = lower
        .iter()
        .zip(upper)
        .map(|(a, b)| format!("{a}:{b}:{mesh}"))
        .collect();
    SiteSet::grid(&expr.join(","))
}

/// `N^{-d} E exp(max Z)` over the grid of mesh `mesh` on `[0, N]^d`.
pub fn pickands_estimate(
    model: &VariogramModel,
    side: f64,
    mesh: f64,
    reps: usize,
    seed: u64,
) -> Result<EstimateWithError> {
    if side.is_nan() || side <= 0.0 {
        return Err(Error::usage(format!(
            "box side must be positive, got {side}"
        )));
    }
    let d = model.dim();
    let per_axis = (side / mesh).round() + 1.0;
    if per_axis.powi(d as i32) > MAX_GRID_POINTS as f64 {
        return Err(Error::Resource(format!(
            "grid of {per_axis}^{d} points exceeds the factorization budget of {MAX_GRID_POINTS}"
        )));
    }
    let grid = box_grid(&vec![0.0; d], &vec![side; d], mesh)?;
    let f = set_function_estimate(model, &grid, reps, seed)?;
    let norm = side.powi(d as i32);
    Ok(EstimateWithError {
        value: f.value / norm,
        std_error: f.std_error / norm,
        reps,
    })
}

/// `n^{-1} E max_{i=1..n} e^{Z(i)}` on the integers, with `Z` anchored at 0.
pub fn extremal_index_estimate(
    model: &VariogramModel,
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<EstimateWithError> {
    if n == 0 {
        return Err(Error::usage("n must be at least 1"));
    }
    if model.dim() != 1 {
        return Err(Error::usage("the extremal index is defined for d = 1"));
    }
    if n > MAX_GRID_POINTS {
        return Err(Error::Resource(format!(
            "n = {n} exceeds the factorization budget of {MAX_GRID_POINTS}"
        )));
    }
    let sites = SiteSet::from_flat((1..=n).map(|i| i as f64).collect(), 1)?;
    let f = set_function_estimate(model, &sites, reps, seed)?;
    Ok(EstimateWithError {
        value: f.value / n as f64,
        std_error: f.std_error / n as f64,
        reps,
    })
}
