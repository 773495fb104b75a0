//! One-time factorization of the covariance of `(W(t_1), ..., W(t_n))` and
//! the per-cluster Gaussian draws built on it.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::sites::SiteSet;
use crate::variogram::VariogramModel;

/// Jitter schedule relative to the mean diagonal: 0, then 1e-12 up to 1e-6 in decades.
const JITTER_START: f64 = 1e-12;
const JITTER_MAX: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct FactorizedGaussian {
    sites: SiteSet,
    model: VariogramModel,
    /// Class ids (see [`SiteSet::class_of`]) that take part in the factorization.
    factored: Vec<usize>,
    /// Packed row-major lower triangle of L, with L L^T = Sigma + jitter I.
    factor: Vec<f64>,
    jitter_used: f64,
    /// `gamma(t_a - t_b)` over classes, row-major.
    drift: Vec<f64>,
}

impl FactorizedGaussian {
    pub fn build(sites: &SiteSet, model: &VariogramModel) -> Result<Self> {
        if sites.dim() != model.dim() {
            return Err(Error::usage(format!(
                "sites have dimension {}, model expects {}",
                sites.dim(),
                model.dim()
            )));
        }
        let reps = sites.representatives();
        let r = reps.len();

        // The origin has variance 0 and stays pinned at W = 0.
        let factored: Vec<usize> = (0..r).filter(|&c| !sites.is_origin(reps[c])).collect();

        let m = factored.len();
        let sigma = DMatrix::from_fn(m, m, |a, b| {
            model.cov_unchecked(
                sites.point(reps[factored[a]]),
                sites.point(reps[factored[b]]),
            )
        });
        let (factor, jitter_used) = factorize(&sigma).ok_or_else(|| Error::Factorization {
            alpha: model.alpha(),
            diameter: sites.diameter(),
            jitter: JITTER_MAX * mean_diag(&sigma),
        })?;

        let mut drift = vec![0.0; r * r];
        for a in 0..r {
            for b in 0..a {
                let g = model.gamma_diff(sites.point(reps[a]), sites.point(reps[b]));
                drift[a * r + b] = g;
                drift[b * r + a] = g;
            }
        }

        Ok(Self {
            sites: sites.clone(),
            model: model.clone(),
            factored,
            factor,
            jitter_used,
            drift,
        })
    }

    pub fn sites(&self) -> &SiteSet {
        &self.sites
    }

    pub fn model(&self) -> &VariogramModel {
        &self.model
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn jitter_used(&self) -> f64 {
        self.jitter_used
    }

    /// Number of standard normals consumed per draw.
    pub fn rank(&self) -> usize {
        self.factored.len()
    }

    /// `gamma(t_j - t_k)` for raw site indices.
    pub fn drift(&self, j: usize, k: usize) -> f64 {
        let r = self.sites.num_representatives();
        self.drift[self.sites.class_of(j) * r + self.sites.class_of(k)]
    }

    /// Dense lower-triangular factor over the factored representatives.
    pub fn factor_matrix(&self) -> DMatrix<f64> {
        let m = self.factored.len();
        DMatrix::from_fn(m, m, |i, j| {
            if j <= i {
                self.factor[i * (i + 1) / 2 + j]
            } else {
                0.0
            }
        })
    }

    /// Raw site index of each row of [`Self::factor_matrix`].
    pub fn factored_sites(&self) -> Vec<usize> {
        let reps = self.sites.representatives();
        self.factored.iter().map(|&c| reps[c]).collect()
    }

    /// One draw of `W` at every raw site.
    pub fn sample_w(&self, stream: &mut RandomStream) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.sample_w_into(stream, &mut out);
        out
    }

    pub fn sample_w_into(&self, stream: &mut RandomStream, out: &mut [f64]) {
        let m = self.factored.len();
        let mut z = vec![0.0; m];
        stream.fill_standard_normal(&mut z);
        let mut per_class = vec![0.0; self.sites.num_representatives()];
        let mut row = 0;
        for (i, &c) in self.factored.iter().enumerate() {
            let l = &self.factor[row..row + i + 1];
            per_class[c] = l.iter().zip(&z[..=i]).map(|(a, b)| a * b).sum();
            row += i + 1;
        }
        for (j, v) in out.iter_mut().enumerate() {
            *v = per_class[self.sites.class_of(j)];
        }
    }

    /// `X_j = W_j - gamma(t_j - t_anchor)` for a fresh draw of `W`.
    pub fn sample_drifted(&self, anchor: usize, stream: &mut RandomStream) -> Result<Vec<f64>> {
        if anchor >= self.len() {
            return Err(Error::IndexOutOfRange {
                index: anchor,
                len: self.len(),
            });
        }
        let mut x = self.sample_w(stream);
        self.apply_drift(anchor, &mut x);
        Ok(x)
    }

    pub(crate) fn apply_drift(&self, anchor: usize, x: &mut [f64]) {
        let r = self.sites.num_representatives();
        let base = self.sites.class_of(anchor) * r;
        for (j, v) in x.iter_mut().enumerate() {
            *v -= self.drift[base + self.sites.class_of(j)];
        }
    }

    /// `gamma(t_j)` at every raw site.
    pub(crate) fn gamma_at_sites(&self) -> Vec<f64> {
        self.sites
            .points()
            .map(|p| self.model.gamma_unchecked(p))
            .collect()
    }
}

fn mean_diag(sigma: &DMatrix<f64>) -> f64 {
    if sigma.nrows() == 0 {
        0.0
    } else {
        sigma.trace() / sigma.nrows() as f64
    }
}

/// Cholesky with the escalating jitter schedule. Returns the packed factor and
/// the jitter that succeeded.
fn factorize(sigma: &DMatrix<f64>) -> Option<(Vec<f64>, f64)> {
    let m = sigma.nrows();
    if m == 0 {
        return Some((Vec::new(), 0.0));
    }
    let scale = mean_diag(sigma);
    let mut jitter = 0.0;
    loop {
        let mut a = sigma.clone();
        for i in 0..m {
            a[(i, i)] += jitter;
        }
        if let Some(chol) = nalgebra::Cholesky::new(a) {
            let l = chol.l();
            let mut packed = Vec::with_capacity(m * (m + 1) / 2);
            for i in 0..m {
                for j in 0..=i {
                    packed.push(l[(i, j)]);
                }
            }
            return Some((packed, jitter));
        }
        jitter = if jitter == 0.0 {
            JITTER_START * scale
        } else {
            jitter * 10.0
        };
        if jitter > JITTER_MAX * scale * (1.0 + 1e-9) {
            return None;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::variogram::Kernel;

    fn line(xs: &[f64]) -> SiteSet {
        SiteSet::from_points(xs.iter().map(|&x| vec![x]).collect()).unwrap()
    }

    fn model(alpha: f64) -> VariogramModel {
        VariogramModel::fractional(alpha, 1.0, 1).unwrap()
    }

    fn sigma_of(fg: &FactorizedGaussian) -> DMatrix<f64> {
        let idx = fg.factored_sites();
        let s = fg.sites();
        DMatrix::from_fn(idx.len(), idx.len(), |a, b| {
            fg.model().cov_w(s.point(idx[a]), s.point(idx[b])).unwrap()
        })
    }

    #[test]
    fn single_origin_site() {
        let fg = FactorizedGaussian::build(&line(&[0.0]), &model(1.0)).unwrap();
        assert_eq!(fg.rank(), 0);
        let mut s = RandomStream::new(1, 1);
        for _ in 0..10 {
            assert_eq!(fg.sample_w(&mut s), vec![0.0]);
        }
        assert_eq!(fg.sample_drifted(0, &mut s).unwrap(), vec![0.0]);
    }

    #[test]
    fn min_kernel_covariance() {
        let fg = FactorizedGaussian::build(&line(&[0.0, 0.5, 1.0]), &model(1.0)).unwrap();
        // origin pinned; the remaining block is [[0.5, 0.5], [0.5, 1.0]]
        let expected = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 1.0]);
        assert_eq!(sigma_of(&fg), expected);
        let l = fg.factor_matrix();
        let err = (&l * l.transpose() - expected).abs().max();
        assert!(err <= fg.jitter_used() + 1e-8);
    }

    #[test]
    fn duplicates_draw_identically() {
        let fg = FactorizedGaussian::build(&line(&[0.3, 0.3]), &model(1.0)).unwrap();
        assert_eq!(fg.rank(), 1);
        let mut s = RandomStream::new(2, 1);
        for _ in 0..100 {
            let w = fg.sample_w(&mut s);
            assert_eq!(w[0], w[1]);
        }
        for _ in 0..10 {
            let x = fg.sample_drifted(1, &mut s).unwrap();
            assert_eq!(x[0], x[1]);
        }
        assert_eq!(fg.drift(0, 1), 0.0);
    }

    #[test]
    fn anchor_out_of_range() {
        let fg = FactorizedGaussian::build(&line(&[0.1, 0.2]), &model(1.0)).unwrap();
        let mut s = RandomStream::new(2, 1);
        assert!(matches!(
            fg.sample_drifted(2, &mut s),
            Err(Error::IndexOutOfRange { index: 2, len: 2 })
        ));
    }

    #[test]
    fn dimension_mismatch() {
        let m2 = VariogramModel::fractional(1.0, 1.0, 2).unwrap();
        assert!(matches!(
            FactorizedGaussian::build(&line(&[0.1]), &m2),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn rank_deficient_alpha_two_needs_jitter() {
        // gamma = t^2/2 gives Cov = s t: rank one on any 1-d site set
        let sites = line(&[0.1, 0.4, 0.9, 1.7, 2.2]);
        let fg = FactorizedGaussian::build(&sites, &model(2.0)).unwrap();
        let sigma = sigma_of(&fg);
        let l = fg.factor_matrix();
        let err = (&l * l.transpose() - &sigma).abs().max();
        let max_diag = sigma.diagonal().max();
        assert!(err <= fg.jitter_used() + 1e-8 * max_diag, "err={err}");
        assert!(fg.jitter_used() <= 1e-6 * sigma.trace() / 5.0 * 1.0001);
    }

    #[test]
    fn reconstruction_within_jitter() {
        let mut s = RandomStream::new(5, 0);
        for &alpha in &[0.5, 1.0, 1.5, 2.0] {
            let pts: Vec<f64> = (0..8).map(|_| 3.0 * s.uniform()).collect();
            let fg = FactorizedGaussian::build(&line(&pts), &model(alpha)).unwrap();
            let sigma = sigma_of(&fg);
            let l = fg.factor_matrix();
            let err = (&l * l.transpose() - &sigma).abs().max();
            assert!(err <= fg.jitter_used() + 1e-8 * sigma.diagonal().max());
        }
    }

    #[test]
    fn drift_table_matches_gamma() {
        let sites = line(&[0.0, 0.7, 2.0]);
        let m = model(1.5);
        let fg = FactorizedGaussian::build(&sites, &m).unwrap();
        for j in 0..3 {
            assert_eq!(fg.drift(j, j), 0.0);
            for k in 0..3 {
                let g = m.gamma(&[sites.point(j)[0] - sites.point(k)[0]]).unwrap();
                assert!((fg.drift(j, k) - g).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn drift_identity_under_shared_stream() {
        let sites = line(&[0.0, 0.3, 0.8, 1.4]);
        let fg = FactorizedGaussian::build(&sites, &model(1.0)).unwrap();
        for k in 0..4 {
            let w = fg.sample_w(&mut RandomStream::new(8, 3));
            let x = fg.sample_drifted(k, &mut RandomStream::new(8, 3)).unwrap();
            for j in 0..4 {
                assert_eq!(x[j], w[j] - fg.drift(j, k));
            }
            assert_eq!(x[k], w[k]);
        }
    }

    #[test]
    fn deterministic_draws() {
        let fg = FactorizedGaussian::build(&line(&[0.2, 0.9]), &model(0.5)).unwrap();
        let a = fg.sample_w(&mut RandomStream::new(77, 4));
        let b = fg.sample_w(&mut RandomStream::new(77, 4));
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_kernel_fails_factorization() {
        // gamma(t) = -|t| is not a variogram; its covariance is indefinite
        let k = Kernel::new(|t: &[f64]| -t[0].abs());
        let m = VariogramModel::custom(k, 1.0, 1.0, 1).unwrap();
        let err = FactorizedGaussian::build(&line(&[1.0, 2.0, 3.0]), &m).unwrap_err();
        assert!(matches!(err, Error::Factorization { .. }));
        assert!(err.to_string().contains("alpha=1"));
    }

    #[test]
    fn variance_at_unit_site() {
        let fg = FactorizedGaussian::build(&line(&[1.0]), &model(1.0)).unwrap();
        let mut s = RandomStream::new(10, 1);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| fg.sample_w(&mut s)[0]).collect();
        let var = xs.iter().map(|x| x * x).sum::<f64>() / n as f64;
        assert!((var - 1.0).abs() < 0.02, "var={var}");
    }

    #[test]
    fn covariance_between_two_sites() {
        let fg = FactorizedGaussian::build(&line(&[0.5, 1.0]), &model(1.0)).unwrap();
        let mut s = RandomStream::new(12, 1);
        let n = 100_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let w = fg.sample_w(&mut s);
            acc += w[0] * w[1];
        }
        let cov = acc / n as f64;
        assert!((cov - 0.5).abs() < 0.02, "cov={cov}");
    }

    #[test]
    fn drifted_mean_at_unit_site() {
        let fg = FactorizedGaussian::build(&line(&[0.0, 1.0]), &model(1.0)).unwrap();
        let mut s = RandomStream::new(13, 1);
        let n = 100_000;
        let mean = (0..n)
            .map(|_| fg.sample_drifted(0, &mut s).unwrap()[1])
            .sum::<f64>()
            / n as f64;
        assert!((mean + 0.5).abs() < 0.02, "mean={mean}");
    }

    /// Empirical moments of 1e5 draws against Sigma, within 4 standard errors.
    #[test]
    fn moments_match_covariance() {
        let mut s = RandomStream::new(21, 0);
        let pts: Vec<f64> = (0..8).map(|_| 2.0 * s.uniform()).collect();
        let sites = line(&pts);
        let n = 100_000usize;
        for &alpha in &[0.5, 1.0, 1.5, 2.0] {
            let m = model(alpha);
            let fg = FactorizedGaussian::build(&sites, &m).unwrap();
            let mut stream = RandomStream::new(22, alpha.to_bits());
            let mut sum = [0.0; 8];
            let mut prod = [[0.0; 8]; 8];
            for _ in 0..n {
                let w = fg.sample_w(&mut stream);
                for a in 0..8 {
                    sum[a] += w[a];
                    for b in 0..8 {
                        prod[a][b] += w[a] * w[b];
                    }
                }
            }
            let nf = n as f64;
            for a in 0..8 {
                let caa = m.cov_w(&[pts[a]], &[pts[a]]).unwrap();
                let mean = sum[a] / nf;
                assert!(
                    mean.abs() <= 4.0 * (caa / nf).sqrt() + 1e-12,
                    "alpha={alpha} mean={mean}"
                );
                for b in 0..8 {
                    let cbb = m.cov_w(&[pts[b]], &[pts[b]]).unwrap();
                    let cab = m.cov_w(&[pts[a]], &[pts[b]]).unwrap();
                    let emp = prod[a][b] / nf;
                    // Var(W_a W_b) = C_aa C_bb + C_ab^2 for centered Gaussians
                    let se = ((caa * cbb + cab * cab) / nf).sqrt();
                    assert!(
                        (emp - cab).abs() <= 4.0 * se + 1e-9,
                        "alpha={alpha} a={a} b={b} emp={emp} cab={cab}"
                    );
                }
            }
        }
    }
}
