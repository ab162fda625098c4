use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dataset::seeded;
use super::Problem;
use crate::error::{Error, Result};
use crate::scalar::{norm2, Scalar};

/// Sampling-noise statistics ‖∇f_i(w) − ∇F(w)‖ at one probe point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradStats {
    /// Fitted exponential tail constant κ.
    pub kappa_hat: f64,
    /// Root mean square of the deviation norms.
    pub sampling_noise_std: f64,
    pub draws: usize,
}

/// Maximum-likelihood exponential scale of the excesses above the
/// (1 − `tail_fraction`) empirical quantile.
pub fn fit_tail_constant(deviations: &[f64], tail_fraction: f64) -> Result<f64> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::contract("tail fraction must lie in (0,1]"));
    }
    if deviations.is_empty() {
        return Err(Error::Degenerate("no deviations to fit".into()));
    }
    let mut sorted = deviations.to_vec();
    sorted.sort_by(f64::total_cmp);
    let idx =
        (((1.0 - tail_fraction) * sorted.len() as f64).floor() as usize).min(sorted.len() - 1);
    let threshold = sorted[idx];
    let excess: Vec<f64> = sorted
        .iter()
        .filter(|&&v| v > threshold)
        .map(|&v| v - threshold)
        .collect();
    if excess.is_empty() {
        return Err(Error::Degenerate(format!(
            "all tail deviations equal {threshold}; kappa would be zero"
        )));
    }
    Ok(excess.iter().sum::<f64>() / excess.len() as f64)
}

pub fn estimate_kappa<T: Scalar, P: Problem<T> + ?Sized>(
    problem: &P,
    w: &[T],
    n_draws: usize,
    seed: u64,
) -> Result<GradStats> {
    estimate_kappa_with(problem, w, n_draws, seed, 0.5)
}

/// Deviation norms at `w`, over the whole population when it has at most
/// `n_draws` samples and over `n_draws` seeded uniform draws otherwise.
pub fn estimate_kappa_with<T: Scalar, P: Problem<T> + ?Sized>(
    problem: &P,
    w: &[T],
    n_draws: usize,
    seed: u64,
    tail_fraction: f64,
) -> Result<GradStats> {
    if n_draws < 1000 {
        return Err(Error::contract(format!(
            "estimate_kappa needs at least 1000 draws, got {n_draws}"
        )));
    }
    let mut full = vec![T::zero(); problem.dim()];
    problem.full_grad(w, &mut full);
    let indices: Vec<usize> = if problem.n() <= n_draws {
        (0..problem.n()).collect()
    } else {
        let mut rng = seeded(seed, 7);
        (0..n_draws)
            .map(|_| rng.random_range(0..problem.n()))
            .collect()
    };
    let mut g = vec![T::zero(); problem.dim()];
    let deviations: Vec<f64> = indices
        .iter()
        .map(|&i| {
            problem.sample_grad(w, i, &mut g);
            for (gj, &fj) in g.iter_mut().zip(&full) {
                *gj = *gj - fj;
            }
            norm2(&g).to_f64_lossy()
        })
        .collect();
    let rms = (deviations.iter().map(|d| d * d).sum::<f64>() / deviations.len() as f64).sqrt();
    Ok(GradStats {
        kappa_hat: fit_tail_constant(&deviations, tail_fraction)?,
        sampling_noise_std: rms,
        draws: deviations.len(),
    })
}

/// c_min = max{4κ ln 10, −ψκ ln κ · ln(√(d ln(1/δ))/(nε))}, second term floored at 0.
pub fn recommend_clip_threshold(
    kappa: f64,
    n: f64,
    d: f64,
    eps: f64,
    delta: f64,
    psi: f64,
) -> Result<f64> {
    if [kappa, n, d, eps, psi].iter().any(|v| !(*v > 0.0)) || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::contract(
            "clip threshold rule needs positive inputs and delta in (0,1)",
        ));
    }
    let first = 4.0 * kappa * 10f64.ln();
    let second = -psi * kappa * kappa.ln() * ((d * (-delta.ln())).sqrt() / (n * eps)).ln();
    Ok(first.max(second.max(0.0)))
}
