//! Counter-based random streams.
//!
//! A stream is addressed by `(seed, stream_id)`: the seed keys a ChaCha8
//! generator and the id selects one of its 2^64 independent streams. The
//! simulator reserves id 0 for the Poisson points and id `k` for cluster `k`,
//! so clusters can be drawn in any order, on any thread, with identical output.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::distributions::normal_quantile;

/// 2^-53
const UNIT: f64 = 1.0 / (1u64 << 53) as f64;

#[derive(Clone, Debug)]
pub struct RandomStream {
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on the open interval (0, 1); never returns 0 or 1.
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * UNIT
    }

    /// Standard exponential via `-ln U`; strictly positive.
    pub fn exponential(&mut self) -> f64 {
        -self.uniform().ln()
    }

    /// Standard normal by inversion of the normal CDF.
    pub fn standard_normal(&mut self) -> f64 {
        normal_quantile(self.uniform())
    }

    pub fn fill_standard_normal(&mut self, out: &mut [f64]) {
        for z in out.iter_mut() {
            *z = self.standard_normal();
        }
    }
}

/// Derives the seed of replication `rep` from a base seed (SplitMix64 finalizer).
pub fn replication_seed(seed: u64, rep: u64) -> u64 {
    let mut z = seed ^ rep.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Replications per stream in [`mc_moments`].
pub(crate) const MC_CHUNK: usize = 4096;

/// Sum and sum of squares of `f` over `reps` draws.
///
/// Draws are split into fixed chunks of [`MC_CHUNK`], chunk `c` reading from
/// stream `(seed, c)`; chunk totals are combined in chunk order, so the result
/// does not depend on the number of threads.
pub(crate) fn mc_moments<F>(reps: usize, seed: u64, f: F) -> (f64, f64)
where
    F: Fn(&mut RandomStream) -> f64 + Sync,
{
    mc_moments_multi(reps, seed, 1, |s, out| out[0] = f(s))
        .pop()
        .unwrap()
}

/// Like [`mc_moments`] for `k` coupled statistics computed from the same draw.
pub(crate) fn mc_moments_multi<F>(reps: usize, seed: u64, k: usize, f: F) -> Vec<(f64, f64)>
where
    F: Fn(&mut RandomStream, &mut [f64]) + Sync,
{
    let chunks = reps.div_ceil(MC_CHUNK);
    let partial: Vec<Vec<(f64, f64)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut stream = RandomStream::new(seed, c as u64);
            let len = MC_CHUNK.min(reps - c * MC_CHUNK);
            let mut acc = vec![(0.0, 0.0); k];
            let mut out = vec![0.0; k];
            for _ in 0..len {
                f(&mut stream, &mut out);
                for (a, &x) in acc.iter_mut().zip(&out) {
                    a.0 += x;
                    a.1 += x * x;
                }
            }
            acc
        })
        .collect();
    let mut total = vec![(0.0, 0.0); k];
    for p in partial {
        for (t, q) in total.iter_mut().zip(p) {
            t.0 += q.0;
            t.1 += q.1;
        }
    }
    total
}

/// Mean and standard error from a sum and sum of squares over `n` draws.
pub(crate) fn mean_and_se(sum: f64, sum_sq: f64, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = sum / nf;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
    (mean, (var / nf).sqrt())
}
