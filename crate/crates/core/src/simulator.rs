//! The exact simulation loop, the truncated baseline, and marginal transforms.
//!
//! Cluster `k` pairs the `k`-th Poisson point `v` with an anchor `T ~ mu` and
//! a drifted Gaussian draw `X`, and sets
//! `C_j = v + X_j - log(sum_l w_l e^{X_l})`. Since the log-sum is at least
//! `log w_j + X_j`, every cluster satisfies `C_j <= v - log w_j`. Once the
//! running suprema satisfy `min_j (sup_j + log w_j) >= v_next`, no later
//! cluster can raise any coordinate and the loop stops.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gauss::FactorizedGaussian;
use crate::pointprocess::{SamplingMeasure, VStream};
use crate::rng::{replication_seed, RandomStream};
use crate::sites::SiteSet;
use crate::variogram::VariogramModel;

pub const DEFAULT_CLUSTER_CAP: u64 = 10_000_000;
pub const DEFAULT_TRACE_CAP: usize = 100_000;

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterDraw {
    pub v: f64,
    pub anchor: usize,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FieldSample {
    pub values: Vec<f64>,
    pub num_clusters: u64,
    /// Poisson points in emission order, truncated at the trace cap.
    pub v_trace: Vec<f64>,
    pub seed: u64,
    #[serde(skip)]
    pub elapsed: Duration,
    /// `min_j (sup_j + log w_j) - v` at the terminating point; nonnegative for
    /// the exact simulator.
    pub termination_gap: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Marginal {
    Gumbel,
    Frechet,
    Weibull,
}

#[derive(Clone, Copy, Debug)]
pub struct SimConfig {
    /// Clusters computed per parallel step.
    pub workers: usize,
    pub cluster_cap: u64,
    pub trace_cap: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            workers: 1,
            cluster_cap: DEFAULT_CLUSTER_CAP,
            trace_cap: DEFAULT_TRACE_CAP,
        }
    }
}

impl SimConfig {
    pub fn with_workers(workers: usize) -> Self {
        Self {
            workers,
            ..Self::default()
        }
    }
}

/// Draws one cluster for the Poisson point `v`.
pub fn generate_cluster(
    fg: &FactorizedGaussian,
    measure: &SamplingMeasure,
    v: f64,
    stream: &mut RandomStream,
) -> Result<ClusterDraw> {
    if measure.len() != fg.len() {
        return Err(Error::usage(format!(
            "measure has {} weights for {} sites",
            measure.len(),
            fg.len()
        )));
    }
    let anchor = measure.sample_anchor(stream);
    let mut x = fg.sample_drifted(anchor, stream)?;
    let lw = measure.log_weights();
    let peak = x
        .iter()
        .zip(lw)
        .map(|(a, b)| a + b)
        .fold(f64::NEG_INFINITY, f64::max);
    let tail: f64 = x.iter().zip(lw).map(|(a, b)| (a + b - peak).exp()).sum();
    let log_norm = peak + tail.ln();
    for xj in x.iter_mut() {
        *xj = v + (*xj - log_norm);
    }
    Ok(ClusterDraw {
        v,
        anchor,
        values: x,
    })
}

/// Reusable simulation engine for one site set, model and measure.
pub struct Simulator {
    fg: FactorizedGaussian,
    measure: SamplingMeasure,
    config: SimConfig,
    pool: Option<rayon::ThreadPool>,
}

impl Simulator {
    pub fn new(
        sites: &SiteSet,
        model: &VariogramModel,
        measure: Option<SamplingMeasure>,
        config: SimConfig,
    ) -> Result<Self> {
        let fg = FactorizedGaussian::build(sites, model)?;
        let measure = match measure {
            Some(m) => m,
            None => SamplingMeasure::uniform(sites.len())?,
        };
        Self::from_sampler(fg, measure, config)
    }

    pub fn from_sampler(
        fg: FactorizedGaussian,
        measure: SamplingMeasure,
        config: SimConfig,
    ) -> Result<Self> {
        if config.workers == 0 {
            return Err(Error::usage("workers must be at least 1"));
        }
        if config.cluster_cap == 0 {
            return Err(Error::usage("cluster cap must be at least 1"));
        }
        if measure.len() != fg.len() {
            return Err(Error::usage(format!(
                "measure has {} weights for {} sites",
                measure.len(),
                fg.len()
            )));
        }
        let pool = if config.workers > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(config.workers)
                    .build()
                    .map_err(|e| Error::Resource(format!("thread pool: {e}")))?,
            )
        } else {
            None
        };
        Ok(Self {
            fg,
            measure,
            config,
            pool,
        })
    }

    pub fn sampler(&self) -> &FactorizedGaussian {
        &self.fg
    }

    pub fn measure(&self) -> &SamplingMeasure {
        &self.measure
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    fn cluster(&self, seed: u64, index: u64, v: f64) -> Result<ClusterDraw> {
        let mut stream = RandomStream::new(seed, index);
        generate_cluster(&self.fg, &self.measure, v, &mut stream)
    }

    /// One exact draw of the field at the sites.
    ///
    /// Clusters are produced in steps of `workers`; within a step they run in
    /// parallel and are merged in index order, so the result does not depend
    /// on `workers`.
    pub fn simulate(&self, seed: u64) -> Result<FieldSample> {
        let start = Instant::now();
        let n = self.fg.len();
        let lw = self.measure.log_weights();
        let cap = self.config.cluster_cap;
        let mut vs = VStream::for_seed(seed);
        let mut sup = vec![f64::NEG_INFINITY; n];
        let mut trace = Vec::new();
        let mut done: u64 = 0;
        let mut last_v = f64::NAN;

        loop {
            let step = (self.config.workers as u64).min(cap - done);
            if step == 0 {
                return Err(Error::ClusterCap {
                    cap,
                    last_v,
                    gap: bound(&sup, lw) - last_v,
                });
            }
            let points: Vec<(u64, f64)> = (1..=step).map(|i| (done + i, vs.next_v())).collect();
            let clusters: Vec<ClusterDraw> = match &self.pool {
                Some(pool) => pool.install(|| {
                    points
                        .par_iter()
                        .map(|&(k, v)| self.cluster(seed, k, v))
                        .collect::<Result<_>>()
                })?,
                None => points
                    .iter()
                    .map(|&(k, v)| self.cluster(seed, k, v))
                    .collect::<Result<_>>()?,
            };

            for cluster in clusters {
                done += 1;
                last_v = cluster.v;
                if trace.len() < self.config.trace_cap {
                    trace.push(cluster.v);
                }
                let gap = bound(&sup, lw) - cluster.v;
                for (s, c) in sup.iter_mut().zip(&cluster.values) {
                    if *c > *s {
                        *s = *c;
                    }
                }
                if gap >= 0.0 {
                    return Ok(FieldSample {
                        values: sup,
                        num_clusters: done,
                        v_trace: trace,
                        seed,
                        elapsed: start.elapsed(),
                        termination_gap: gap,
                    });
                }
            }
        }
    }

    /// `reps` independent draws; replication `r` uses seed
    /// [`replication_seed`]`(seed, r)`.
    pub fn simulate_reps(&self, seed: u64, reps: usize) -> Result<Vec<FieldSample>> {
        let run = |r: usize| self.simulate(replication_seed(seed, r as u64));
        if self.pool.is_some() {
            (0..reps).map(run).collect()
        } else {
            (0..reps).into_par_iter().map(run).collect()
        }
    }
}

fn bound(sup: &[f64], lw: &[f64]) -> f64 {
    sup.iter()
        .zip(lw)
        .map(|(s, l)| s + l)
        .fold(f64::INFINITY, f64::min)
}

/// Exact sample with default limits. `measure = None` means uniform weights.
pub fn simulate(
    sites: &SiteSet,
    model: &VariogramModel,
    measure: Option<SamplingMeasure>,
    seed: u64,
    workers: usize,
) -> Result<FieldSample> {
    Simulator::new(sites, model, measure, SimConfig::with_workers(workers))?.simulate(seed)
}

/// Truncated baseline: `max_{i <= N} (V_i + W_i(t_j) - gamma(t_j))`.
///
/// Biased for any finite `N`; kept to show how the truncation fails on wide
/// site sets. Draw `i` uses stream `(seed, i)`, so runs with different `N`
/// share their first draws.
pub fn simulate_naive(
    sites: &SiteSet,
    model: &VariogramModel,
    seed: u64,
    truncation: u64,
) -> Result<FieldSample> {
    let fg = FactorizedGaussian::build(sites, model)?;
    simulate_naive_with(&fg, seed, truncation)
}

pub(crate) fn simulate_naive_with(
    fg: &FactorizedGaussian,
    seed: u64,
    truncation: u64,
) -> Result<FieldSample> {
    if truncation == 0 {
        return Err(Error::usage("truncation must be at least 1"));
    }
    let start = Instant::now();
    let gamma = fg.gamma_at_sites();
    let mut vs = VStream::for_seed(seed);
    let mut sup = vec![f64::NEG_INFINITY; fg.len()];
    let mut trace = Vec::new();
    for i in 1..=truncation {
        let v = vs.next_v();
        if trace.len() < DEFAULT_TRACE_CAP {
            trace.push(v);
        }
        let w = fg.sample_w(&mut RandomStream::new(seed, i));
        for ((s, wj), g) in sup.iter_mut().zip(&w).zip(&gamma) {
            *s = s.max(v + wj - g);
        }
    }
    Ok(FieldSample {
        values: sup,
        num_clusters: truncation,
        v_trace: trace,
        seed,
        elapsed: start.elapsed(),
        termination_gap: f64::NAN,
    })
}

/// Maps Gumbel margins to Frechet (`e^x`) or reversed Weibull (`-e^{-x}`).
pub fn transform_marginals(sample: &FieldSample, target: Marginal) -> FieldSample {
    let f: fn(f64) -> f64 = match target {
        Marginal::Gumbel => |x| x,
        Marginal::Frechet => f64::exp,
        Marginal::Weibull => |x| -(-x).exp(),
    };
    FieldSample {
        values: sample.values.iter().map(|&x| f(x)).collect(),
        ..sample.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64]) -> SiteSet {
        SiteSet::from_points(xs.iter().map(|&x| vec![x]).collect()).unwrap()
    }

    fn model(alpha: f64) -> VariogramModel {
        VariogramModel::fractional(alpha, 1.0, 1).unwrap()
    }

    #[test]
    fn single_site_cluster_is_v() {
        for t in [0.0, 0.7, 5.0] {
            let fg = FactorizedGaussian::build(&line(&[t]), &model(1.0)).unwrap();
            let m = SamplingMeasure::uniform(1).unwrap();
            let mut s = RandomStream::new(1, 1);
            for v in [-3.0, 0.0, 1.25] {
                let c = generate_cluster(&fg, &m, v, &mut s).unwrap();
                assert_eq!(c.values, vec![v]);
            }
        }
    }

    #[test]
    fn identical_sites_cluster_is_v() {
        let fg = FactorizedGaussian::build(&line(&[0.4; 6]), &model(1.0)).unwrap();
        let m = SamplingMeasure::uniform(6).unwrap();
        let mut s = RandomStream::new(2, 1);
        for _ in 0..100 {
            let c = generate_cluster(&fg, &m, 0.3, &mut s).unwrap();
            for x in &c.values {
                assert!((x - 0.3).abs() < 1e-14);
                assert_eq!(*x, c.values[0]);
            }
        }
    }

    #[test]
    fn cluster_dominance_and_normalization() {
        let sites = line(&[0.0, 0.3, 0.9, 1.5, 4.0]);
        let fg = FactorizedGaussian::build(&sites, &model(1.0)).unwrap();
        for m in [
            SamplingMeasure::uniform(5).unwrap(),
            SamplingMeasure::from_weights(&[0.6, 0.1, 0.1, 0.1, 0.1]).unwrap(),
        ] {
            let mut s = RandomStream::new(3, 1);
            for i in 0..1000 {
                let v = 2.0 - i as f64 * 0.01;
                let c = generate_cluster(&fg, &m, v, &mut s).unwrap();
                let total: f64 = c
                    .values
                    .iter()
                    .zip(m.weights())
                    .map(|(cj, w)| w * (cj - v).exp())
                    .sum();
                assert!((total - 1.0).abs() < 1e-10);
                for (cj, lw) in c.values.iter().zip(m.log_weights()) {
                    assert!(*cj <= v - lw + 1e-12);
                }
            }
        }
    }

    #[test]
    fn measure_size_must_match() {
        let fg = FactorizedGaussian::build(&line(&[0.1, 0.2]), &model(1.0)).unwrap();
        let m = SamplingMeasure::uniform(3).unwrap();
        assert!(generate_cluster(&fg, &m, 0.0, &mut RandomStream::new(0, 1)).is_err());
        assert!(Simulator::from_sampler(fg, m, SimConfig::default()).is_err());
    }

    #[test]
    fn single_site_uses_two_clusters() {
        for seed in 0..200 {
            let out = simulate(&line(&[0.7]), &model(1.0), None, seed, 1).unwrap();
            assert_eq!(out.num_clusters, 2);
            assert_eq!(out.v_trace.len(), 2);
            assert_eq!(out.values, vec![out.v_trace[0]]);
        }
    }

    #[test]
    fn identical_sites_follow_stopping_rule() {
        let n = 16usize;
        let ln_n = (n as f64).ln();
        for seed in 0..200 {
            let out = simulate(&line(&vec![1.3; n]), &model(1.0), None, seed, 1).unwrap();
            assert!(out.values.iter().all(|&x| x == out.values[0]));
            let v = &out.v_trace;
            // first index M (1-based) with V_M + log n < V_1, up to rounding
            let m = v.iter().position(|&x| x + ln_n < v[0] - 1e-12).unwrap() + 1;
            assert_eq!(out.num_clusters as usize, m);
        }
    }

    #[test]
    fn supremum_and_termination_invariants() {
        let sites = line(&[0.0, 0.25, 0.5, 0.75, 1.0]);
        let sim = Simulator::new(&sites, &model(1.0), None, SimConfig::default()).unwrap();
        for seed in 0..50 {
            let out = sim.simulate(seed).unwrap();
            assert!(out.termination_gap >= 0.0);
            assert_eq!(out.num_clusters as usize, out.v_trace.len());
            // replaying the clusters reproduces the suprema
            let mut sup = vec![f64::NEG_INFINITY; 5];
            for (k, &v) in out.v_trace.iter().enumerate() {
                let c = sim.cluster(seed, k as u64 + 1, v).unwrap();
                for (s, x) in sup.iter_mut().zip(&c.values) {
                    *s = s.max(*x);
                    assert!(out.values.iter().all(|y| y.is_finite()));
                }
            }
            assert_eq!(sup, out.values);
        }
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let sites = line(&[0.0, 0.1, 0.35, 0.8, 1.0, 2.0]);
        let a = Simulator::new(&sites, &model(0.5), None, SimConfig::with_workers(1)).unwrap();
        let b = Simulator::new(&sites, &model(0.5), None, SimConfig::with_workers(3)).unwrap();
        for seed in 0..30 {
            let x = a.simulate(seed).unwrap();
            let y = b.simulate(seed).unwrap();
            assert_eq!(x.values, y.values);
            assert_eq!(x.num_clusters, y.num_clusters);
            assert_eq!(x.v_trace, y.v_trace);
        }
    }

    #[test]
    fn cluster_cap_aborts() {
        let sites = line(&[0.0, 0.5, 1.0]);
        let cfg = SimConfig {
            cluster_cap: 1,
            ..SimConfig::default()
        };
        let sim = Simulator::new(&sites, &model(1.0), None, cfg).unwrap();
        let err = sim.simulate(1).unwrap_err();
        assert!(matches!(err, Error::ClusterCap { cap: 1, .. }));
    }

    #[test]
    fn trace_cap_truncates_trace_only() {
        let sites = line(&[0.5; 64]);
        let cfg = SimConfig {
            trace_cap: 3,
            ..SimConfig::default()
        };
        let sim = Simulator::new(&sites, &model(1.0), None, cfg).unwrap();
        let out = sim.simulate(4).unwrap();
        assert!(out.num_clusters > 3);
        assert_eq!(out.v_trace.len(), 3);
    }

    #[test]
    fn zero_workers_rejected() {
        assert!(simulate(&line(&[0.0]), &model(1.0), None, 0, 0).is_err());
    }

    #[test]
    fn naive_single_origin_is_first_point() {
        for seed in 0..20 {
            let out = simulate_naive(&line(&[0.0]), &model(1.0), seed, 1).unwrap();
            assert_eq!(out.values, vec![VStream::for_seed(seed).next_v()]);
        }
        assert!(simulate_naive(&line(&[0.0]), &model(1.0), 0, 0).is_err());
    }

    #[test]
    fn naive_grows_with_truncation() {
        let sites = line(&[0.0, 1.0, 3.0]);
        for seed in 0..20 {
            let mut prev = simulate_naive(&sites, &model(1.0), seed, 1).unwrap().values;
            for n in 2..12 {
                let cur = simulate_naive(&sites, &model(1.0), seed, n).unwrap().values;
                for (a, b) in prev.iter().zip(&cur) {
                    assert!(b >= a);
                }
                prev = cur;
            }
        }
    }

    #[test]
    fn marginal_transforms() {
        let s = FieldSample {
            values: vec![0.0, -2.0, 3.0],
            num_clusters: 2,
            v_trace: vec![],
            seed: 0,
            elapsed: Duration::ZERO,
            termination_gap: 0.0,
        };
        assert_eq!(transform_marginals(&s, Marginal::Gumbel).values, s.values);
        let f = transform_marginals(&s, Marginal::Frechet).values;
        let w = transform_marginals(&s, Marginal::Weibull).values;
        assert_eq!(f[0], 1.0);
        assert_eq!(w[0], -1.0);
        assert!(f.iter().all(|x| *x > 0.0));
        assert!(w.iter().all(|x| *x < 0.0));
    }
}
