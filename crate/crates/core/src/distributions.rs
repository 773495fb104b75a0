//! Closed-form distribution functions and the Monte Carlo oracles for the
//! finite-dimensional laws of the field.

use serde::Serialize;
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};
use crate::gauss::FactorizedGaussian;
use crate::rng::{mc_moments, mean_and_se, replication_seed, RandomStream};
use crate::sites::SiteSet;
use crate::variogram::VariogramModel;

/// Gumbel CDF `exp(-exp(-(x - loc)))`.
pub fn gumbel_cdf(x: f64, loc: f64) -> f64 {
    (-(-(x - loc)).exp()).exp()
}

/// Inverse of the standard Gumbel CDF.
pub fn gumbel_quantile(p: f64) -> f64 {
    -(-p.ln()).ln()
}

/// Frechet(1) CDF `exp(-1/x)` for `x > 0`.
pub fn frechet_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-1.0 / x).exp()
    }
}

/// Reversed Weibull(1) CDF `exp(x)` for `x < 0`.
pub fn weibull_cdf(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        x.exp()
    }
}

/// Standard normal CDF via the complementary error function (< 1e-15 absolute error).
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile for `p` in (0, 1): an `erfc_inv` starting point
/// polished by one Newton step on [`std_normal_cdf`].
pub fn normal_quantile(p: f64) -> f64 {
    let x = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    let density = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    if density > 1e-300 {
        x - (std_normal_cdf(x) - p) / density
    } else {
        x
    }
}

/// `-log P(eta(0) <= y1, eta(s) <= y2)` for the two-site law.
///
/// With `lambda = sqrt(gamma(s) / 2)` this is
/// `e^{-y1} Phi(lambda + (y2 - y1) / (2 lambda)) + e^{-y2} Phi(lambda + (y1 - y2) / (2 lambda))`,
/// and `e^{-min(y1, y2)}` when `gamma(s) = 0`.
pub fn bivariate_neglog(model: &VariogramModel, s: &[f64], y1: f64, y2: f64) -> Result<f64> {
    let g = model.gamma(s)?;
    if g == 0.0 {
        return Ok((-y1.min(y2)).exp());
    }
    let lambda = (g / 2.0).sqrt();
    let d = (y2 - y1) / (2.0 * lambda);
    Ok((-y1).exp() * std_normal_cdf(lambda + d) + (-y2).exp() * std_normal_cdf(lambda - d))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CdfEstimate {
    pub value: f64,
    pub std_error: f64,
    pub reps: usize,
}

/// Monte Carlo estimate of `P(eta(t_j) <= y_j for all j)` via
/// `exp(-E exp(max_j (Z(t_j - t_1) - y_j)))`.
pub fn fdd_cdf_oracle(
    sites: &SiteSet,
    model: &VariogramModel,
    y: &[f64],
    reps: usize,
    seed: u64,
) -> Result<CdfEstimate> {
    fdd_cdf_oracle_anchored(sites, model, y, 0, reps, seed)
}

/// [`fdd_cdf_oracle`] with `Z` anchored at site `anchor` instead of the first site.
pub fn fdd_cdf_oracle_anchored(
    sites: &SiteSet,
    model: &VariogramModel,
    y: &[f64],
    anchor: usize,
    reps: usize,
    seed: u64,
) -> Result<CdfEstimate> {
    if y.len() != sites.len() {
        return Err(Error::usage(format!(
            "{} thresholds for {} sites",
            y.len(),
            sites.len()
        )));
    }
    if let Some(v) = y.iter().find(|v| !v.is_finite()) {
        return Err(Error::usage(format!("threshold {v} is not finite")));
    }
    if reps == 0 {
        return Err(Error::usage("reps must be at least 1"));
    }
    if anchor >= sites.len() {
        return Err(Error::IndexOutOfRange {
            index: anchor,
            len: sites.len(),
        });
    }
    let origin: Vec<f64> = sites.point(anchor).iter().map(|x| -x).collect();
    let shifted = sites.translated(&origin)?;
    let z = ZField::new(&shifted, model)?;
    let (sum, sum_sq) = mc_moments(reps, seed, |stream| {
        let zs = z.sample(stream);
        let m = zs
            .iter()
            .zip(y)
            .map(|(a, b)| a - b)
            .fold(f64::NEG_INFINITY, f64::max);
        m.exp()
    });
    let (mean, se) = mean_and_se(sum, sum_sq, reps);
    let value = (-mean).exp();
    Ok(CdfEstimate {
        value,
        std_error: value * se,
        reps,
    })
}

/// The field `Z(t) = W(t) - gamma(t)`: mean `-gamma`, covariance as `W`, `Z(0) = 0`.
pub(crate) struct ZField {
    fg: FactorizedGaussian,
    gamma: Vec<f64>,
}

impl ZField {
    pub(crate) fn new(sites: &SiteSet, model: &VariogramModel) -> Result<Self> {
        let fg = FactorizedGaussian::build(sites, model)?;
        let gamma = fg.gamma_at_sites();
        Ok(Self { fg, gamma })
    }

    pub(crate) fn sample(&self, stream: &mut RandomStream) -> Vec<f64> {
        let mut w = self.fg.sample_w(stream);
        for (v, g) in w.iter_mut().zip(&self.gamma) {
            *v -= g;
        }
        w
    }

    /// `W` and `gamma` separately, for estimators that need both.
    pub(crate) fn sample_w(&self, stream: &mut RandomStream) -> Vec<f64> {
        self.fg.sample_w(stream)
    }

    pub(crate) fn gamma(&self) -> &[f64] {
        &self.gamma
    }
}

/// The translation-invariant functional `max_j e^{x_j} / sum_j e^{x_j}`.
fn peak_share(x: &[f64]) -> f64 {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    1.0 / x.iter().map(|v| (v - m).exp()).sum::<f64>()
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct MeasureCheck {
    /// `E e^{W(t) - gamma(t)} F(W - gamma)`.
    pub lhs: f64,
    pub lhs_se: f64,
    /// `E F(Z(. - t))`.
    pub rhs: f64,
    pub rhs_se: f64,
    pub z_score: f64,
    pub reps: usize,
}

/// Estimates both sides of the change-of-measure identity
/// `E e^{W(t) - gamma(t)} F(W - gamma) = E F(Z(. - t))` independently, for
/// the translation-invariant `F(x) = max_j e^{x_j} / sum_j e^{x_j}`, and
/// returns their standardized difference.
pub fn change_of_measure_check(
    model: &VariogramModel,
    grid: &SiteSet,
    anchor: &[f64],
    reps: usize,
    seed: u64,
) -> Result<MeasureCheck> {
    if reps == 0 {
        return Err(Error::usage("reps must be at least 1"));
    }
    let k = grid
        .points()
        .position(|p| p == anchor)
        .ok_or_else(|| Error::usage(format!("anchor {anchor:?} is not a grid point")))?;

    let w_field = ZField::new(grid, model)?;
    let (ls, lq) = mc_moments(reps, seed, |stream| {
        let w = w_field.sample_w(stream);
        let x: Vec<f64> = w.iter().zip(w_field.gamma()).map(|(a, g)| a - g).collect();
        x[k].exp() * peak_share(&x)
    });

    let neg: Vec<f64> = anchor.iter().map(|a| -a).collect();
    let z_field = ZField::new(&grid.translated(&neg)?, model)?;
    let (rs, rq) = mc_moments(reps, replication_seed(seed, 1), |stream| {
        peak_share(&z_field.sample(stream))
    });

    let (lhs, lhs_se) = mean_and_se(ls, lq, reps);
    let (rhs, rhs_se) = mean_and_se(rs, rq, reps);
    let diff = lhs - rhs;
    let denom = (lhs_se * lhs_se + rhs_se * rhs_se).sqrt();
    let z_score = if denom > 0.0 {
        diff / denom
    } else if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    };
    Ok(MeasureCheck {
        lhs,
        lhs_se,
        rhs,
        rhs_se,
        z_score,
        reps,
    })
}
