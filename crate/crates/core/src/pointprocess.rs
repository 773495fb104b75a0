//! Poisson points in decreasing order and the discrete anchor measure.

use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::RandomStream;

/// Probability weights on the sites.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingMeasure {
    weights: Vec<f64>,
    log_weights: Vec<f64>,
    cumulative: Vec<f64>,
    uniform: bool,
}

impl SamplingMeasure {
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty("sampling measure"));
        }
        let w = 1.0 / n as f64;
        let mut m = Self::build(vec![w; n]);
        m.uniform = true;
        m.log_weights = vec![-(n as f64).ln(); n];
        Ok(m)
    }

    /// Normalizes strictly positive, finite weights to sum to one.
    pub fn from_weights(raw: &[f64]) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::Empty("sampling measure"));
        }
        if let Some(w) = raw.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::usage(format!(
                "measure weights must be positive and finite, got {w}"
            )));
        }
        let total: f64 = raw.iter().sum();
        Ok(Self::build(raw.iter().map(|w| w / total).collect()))
    }

    /// One weight per row (first column) of a CSV file without header.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)?;
        let mut raw = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            let field = rec.get(0).unwrap_or("");
            raw.push(field.parse::<f64>().map_err(|_| {
                Error::usage(format!("{}: `{field}` is not a weight", path.display()))
            })?);
        }
        Self::from_weights(&raw)
    }

    fn build(weights: Vec<f64>) -> Self {
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        Self {
            weights,
            log_weights,
            cumulative,
            uniform: false,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// Draws a site index with probability `weights[index]`.
    pub fn sample_anchor(&self, stream: &mut RandomStream) -> usize {
        let u = stream.uniform();
        let n = self.weights.len();
        if self.uniform {
            return ((u * n as f64) as usize).min(n - 1);
        }
        self.cumulative.partition_point(|&c| c <= u).min(n - 1)
    }
}

/// The points `V_k = -log(Gamma_k)` of a Poisson process with intensity
/// `e^{-v} dv`, emitted in strictly decreasing order; `Gamma_k` is a running
/// sum of standard exponentials.
#[derive(Clone, Debug)]
pub struct VStream {
    gamma_sum: f64,
    count: u64,
    last: f64,
    stream: RandomStream,
}

impl VStream {
    pub fn new(stream: RandomStream) -> Self {
        Self {
            gamma_sum: 0.0,
            count: 0,
            last: f64::INFINITY,
            stream,
        }
    }

    /// The stream reserved for Poisson points of simulation `seed`.
    pub fn for_seed(seed: u64) -> Self {
        Self::new(RandomStream::new(seed, 0))
    }

    pub fn next_v(&mut self) -> f64 {
        let e = self.stream.exponential();
        self.push_exponential(e)
    }

    pub(crate) fn push_exponential(&mut self, e: f64) -> f64 {
        let next = self.gamma_sum + e;
        self.gamma_sum = if next > self.gamma_sum {
            next
        } else {
            self.gamma_sum.next_up()
        };
        let mut v = -self.gamma_sum.ln();
        // ln can merge neighbouring floats; keep the sequence strictly decreasing
        if v >= self.last {
            v = self.last.next_down();
        }
        self.last = v;
        self.count += 1;
        v
    }

    pub fn gamma_sum(&self) -> f64 {
        self.gamma_sum
    }

    pub fn count(&self) -> u64 {
        self.count
    }
}
