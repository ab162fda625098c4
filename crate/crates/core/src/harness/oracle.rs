//! Monte-Carlo checks of the accountant's quadrature, by direct simulation
//! of the mixture kernels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{compose_sample, log_likelihood_ratio, MixtureKernel, NoiseFamily};

const CHUNK: u64 = 1 << 16;
const MIN_SAMPLES: u64 = 100_000;

/// One simulated draw from `kernel`.
pub fn sample_kernel<R: Rng + ?Sized>(kernel: &MixtureKernel, rng: &mut R) -> f64 {
    let base = match kernel.family {
        NoiseFamily::Gaussian => rng.sample::<f64, _>(StandardNormal),
        NoiseFamily::Laplace => {
            let u: f64 = rng.random::<f64>() - 0.5;
            -u.signum() * (-2.0 * u.abs()).ln_1p()
        }
    };
    compose_sample(kernel, base, rng.random::<f64>())
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

impl McEstimate {
    /// |estimate − reference| in standard errors.
    pub fn z_score(&self, reference: f64) -> f64 {
        let diff = (self.estimate - reference).abs();
        if diff == 0.0 {
            0.0
        } else {
            diff / self.std_error
        }
    }
}

/// Per-k result of [`mc_validate_moments`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub k: u32,
    pub estimate: f64,
    pub std_error: f64,
}

/// Runs `per_sample` on `n` draws split into fixed chunks with their own
/// streams, so the result does not depend on the thread count.
fn chunked_sums<F>(n: u64, seed: u64, width: usize, per_sample: F) -> (Vec<f64>, Vec<f64>)
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let partial: Vec<(Vec<f64>, Vec<f64>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let len = CHUNK.min(n - c * CHUNK);
            let mut s1 = vec![0.0; width];
            let mut s2 = vec![0.0; width];
            let mut buf = vec![0.0; width];
            for _ in 0..len {
                per_sample(&mut rng, &mut buf);
                for j in 0..width {
                    s1[j] += buf[j];
                    s2[j] += buf[j] * buf[j];
                }
            }
            (s1, s2)
        })
        .collect();
    let mut s1 = vec![0.0; width];
    let mut s2 = vec![0.0; width];
    for (a, b) in partial {
        for j in 0..width {
            s1[j] += a[j];
            s2[j] += b[j];
        }
    }
    (s1, s2)
}

fn finish(s1: f64, s2: f64, n: u64) -> McEstimate {
    let nf = n as f64;
    let mean = s1 / nf;
    let var = ((s2 / nf - mean * mean) * nf / (nf - 1.0)).max(0.0);
    McEstimate {
        estimate: mean,
        std_error: (var / nf).sqrt(),
    }
}

/// Estimates A_k = E_{z∼P0}[(P1(z)/P0(z))^k] for every k in `ks` from the same draws.
pub fn mc_validate_moments(
    p0: &MixtureKernel,
    p1: &MixtureKernel,
    ks: &[u32],
    n_samples: u64,
    seed: u64,
) -> Result<Vec<MomentEstimate>> {
    if n_samples < MIN_SAMPLES {
        return Err(Error::contract(format!(
            "need at least {MIN_SAMPLES} samples, got {n_samples}"
        )));
    }
    let (s1, s2) = chunked_sums(n_samples, seed, ks.len(), |rng, out| {
        let z = sample_kernel(p0, rng);
        let lr = log_likelihood_ratio(p1, p0, z);
        for (o, &k) in out.iter_mut().zip(ks) {
            *o = (k as f64 * lr).exp();
        }
    });
    Ok(ks
        .iter()
        .enumerate()
        .map(|(j, &k)| {
            let e = finish(s1[j], s2[j], n_samples);
            MomentEstimate {
                k,
                estimate: e.estimate,
                std_error: e.std_error,
            }
        })
        .collect())
}

/// Estimates E_{z∼P0}[((1−q) + q·P1(z)/P0(z))^α], the quantity whose log
/// over (α−1) is the per-step divergence of the subsampled mechanism.
pub fn mc_mixture_moment(
    p0: &MixtureKernel,
    p1: &MixtureKernel,
    q: f64,
    alpha: f64,
    n_samples: u64,
    seed: u64,
) -> Result<McEstimate> {
    if n_samples < MIN_SAMPLES {
        return Err(Error::contract(format!(
            "need at least {MIN_SAMPLES} samples, got {n_samples}"
        )));
    }
    let (s1, s2) = chunked_sums(n_samples, seed, 1, |rng, out| {
        let z = sample_kernel(p0, rng);
        let lr = log_likelihood_ratio(p1, p0, z);
        out[0] = ((1.0 - q) + q * lr.exp()).powf(alpha);
    });
    Ok(finish(s1[0], s2[0], n_samples))
}

/// Empirical law of the pointwise privacy loss ε(o) = ln P(o)/P'(o), o ∼ P.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointwiseLoss {
    pub mean: f64,
    pub variance: f64,
    /// (level, quantile) pairs.
    pub quantiles: Vec<(f64, f64)>,
}

pub const LOSS_QUANTILE_LEVELS: [f64; 5] = [0.5, 0.9, 0.99, 0.999, 0.9999];

pub fn mc_pointwise_loss(
    p: &MixtureKernel,
    p_prime: &MixtureKernel,
    n_samples: u64,
    seed: u64,
) -> Result<PointwiseLoss> {
    if n_samples < MIN_SAMPLES {
        return Err(Error::contract(format!(
            "need at least {MIN_SAMPLES} samples, got {n_samples}"
        )));
    }
    let chunks = n_samples.div_ceil(CHUNK);
    let mut losses: Vec<f64> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let len = CHUNK.min(n_samples - c * CHUNK);
            (0..len)
                .map(|_| {
                    let o = sample_kernel(p, &mut rng);
                    log_likelihood_ratio(p, p_prime, o)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let n = losses.len() as f64;
    let mean = losses.iter().sum::<f64>() / n;
    let variance = losses.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    losses.sort_by(f64::total_cmp);
    let quantiles = LOSS_QUANTILE_LEVELS
        .iter()
        .map(|&level| {
            let idx = ((level * n).ceil() as usize).clamp(1, losses.len()) - 1;
            (level, losses[idx])
        })
        .collect();
    Ok(PointwiseLoss {
        mean,
        variance,
        quantiles,
    })
}
