//! Variogram models and the covariance kernels derived from them.
//!
//! Throughout, `W` is a centered Gaussian field with stationary increments,
//! `W(0) = 0` and `Var W(t) = 2 gamma(t)`, so
//! `Cov(W(s), W(t)) = gamma(s) + gamma(t) - gamma(s - t)`.
//! `Z = W - gamma` has mean `-gamma` and the same covariance.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// A user-supplied variogram `t -> gamma(t)`. The caller is responsible for
/// conditional negative definiteness; an invalid kernel shows up as a
/// factorization failure.
type KernelFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

#[derive(Clone)]
pub struct Kernel(Arc<KernelFn>);

impl Kernel {
    pub fn new(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Kernel(Arc::new(f))
    }
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Kernel(..)")
    }
}

#[derive(Clone, Debug)]
pub enum Family {
    /// `gamma(t) = scale * |t|^alpha / 2`.
    Fractional,
    /// `gamma(t) = scale * kernel(t)`.
    Custom(Kernel),
}

#[derive(Clone, Debug)]
pub struct VariogramModel {
    family: Family,
    alpha: f64,
    scale: f64,
    dim: usize,
}

impl VariogramModel {
    pub fn fractional(alpha: f64, scale: f64, dim: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::usage(format!(
                "alpha must lie in (0, 2], got {alpha}"
            )));
        }
        Self::checked(Family::Fractional, alpha, scale, dim)
    }

    /// A plug-in variogram. `alpha` is only carried along for reporting.
    pub fn custom(kernel: Kernel, alpha: f64, scale: f64, dim: usize) -> Result<Self> {
        Self::checked(Family::Custom(kernel), alpha, scale, dim)
    }

    fn checked(family: Family, alpha: f64, scale: f64, dim: usize) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::usage(format!("scale must be positive, got {scale}")));
        }
        if dim == 0 {
            return Err(Error::usage("dimension must be at least 1"));
        }
        Ok(Self {
            family,
            alpha,
            scale,
            dim,
        })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn check_dim(&self, t: &[f64]) -> Result<()> {
        if t.len() != self.dim {
            return Err(Error::usage(format!(
                "point has dimension {}, model expects {}",
                t.len(),
                self.dim
            )));
        }
        Ok(())
    }

    pub fn gamma(&self, t: &[f64]) -> Result<f64> {
        self.check_dim(t)?;
        Ok(self.gamma_unchecked(t))
    }

    /// `gamma(s - t)` without allocating or checking dimensions.
    pub(crate) fn gamma_diff(&self, s: &[f64], t: &[f64]) -> f64 {
        match &self.family {
            Family::Fractional => {
                let sq: f64 = s.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum();
                self.fractional_from_sq(sq)
            }
            Family::Custom(k) => {
                let d: Vec<f64> = s.iter().zip(t).map(|(a, b)| a - b).collect();
                self.scale * (k.0)(&d)
            }
        }
    }

    pub(crate) fn gamma_unchecked(&self, t: &[f64]) -> f64 {
        match &self.family {
            Family::Fractional => {
                let sq: f64 = t.iter().map(|x| x * x).sum();
                self.fractional_from_sq(sq)
            }
            Family::Custom(k) => self.scale * (k.0)(t),
        }
    }

    fn fractional_from_sq(&self, sq: f64) -> f64 {
        if sq == 0.0 {
            return 0.0;
        }
        // |t|^alpha = (|t|^2)^(alpha/2); exact for alpha = 2.
        let pow = if self.alpha == 2.0 {
            sq
        } else {
            sq.powf(self.alpha / 2.0)
        };
        self.scale * pow / 2.0
    }

    pub(crate) fn cov_unchecked(&self, s: &[f64], t: &[f64]) -> f64 {
        self.gamma_unchecked(s) + self.gamma_unchecked(t) - self.gamma_diff(s, t)
    }

    pub fn cov_w(&self, s: &[f64], t: &[f64]) -> Result<f64> {
        self.check_dim(s)?;
        self.check_dim(t)?;
        Ok(self.cov_unchecked(s, t))
    }

    pub fn mean_z(&self, t: &[f64]) -> Result<f64> {
        Ok(-self.gamma(t)?)
    }

    pub fn cov_z(&self, s: &[f64], t: &[f64]) -> Result<f64> {
        self.cov_w(s, t)
    }
}
