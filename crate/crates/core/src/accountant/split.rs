use super::config::AccountantConfig;
use super::moments::log_moments;
use super::rdp::binomial_divergence;
use crate::error::{Error, Result};
use crate::kernel::NoiseFamily;

/// D_α when the differing element's sensitivity is spread over several coordinates.
///
/// `split` holds squared-norm weights summing to s². For the Gaussian family
/// coordinate j is shifted by s·√(w_j/Σw); for the Laplace family (an l1
/// budget) by s·w_j/Σw. Coordinates are independent, so the log-moments add.
pub fn worst_case_split_check(config: &AccountantConfig, split: &[f64], alpha: u32) -> Result<f64> {
    config.validate()?;
    if config.p != 1 {
        return Err(Error::contract("split check is defined for p = 1"));
    }
    if split.is_empty() || split.len() > 4 || split.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
        return Err(Error::contract("split needs 1 to 4 nonnegative weights"));
    }
    let s = config.sensitivity;
    let total: f64 = split.iter().sum();
    if !((total - s * s).abs() <= 1e-9 * s * s) {
        return Err(Error::contract(format!(
            "split weights sum to {total}, expected s² = {}",
            s * s
        )));
    }
    let (p0, _) = config.kernels()?;
    let mut combined = vec![0.0; alpha as usize + 1];
    for &w in split.iter().filter(|w| **w > 0.0) {
        let frac = w / total;
        let shift = match config.family {
            NoiseFamily::Gaussian => s * frac.sqrt(),
            NoiseFamily::Laplace => s * frac,
        };
        let lm = log_moments(&p0, &p0.with_shift(shift), alpha)?;
        for (acc, v) in combined.iter_mut().zip(lm) {
            *acc += v;
        }
    }
    binomial_divergence(alpha, config.q, 1.0, &combined)
}
