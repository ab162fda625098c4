use serde::{Deserialize, Serialize};

use super::config::AccountantConfig;
use crate::error::{Error, Result};
use crate::kernel::NoiseFamily;

/// Order-of-magnitude (ε, δ) from the large-τ asymptotics, all hidden
/// constants set to one. Only trends are meaningful.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticEstimate {
    pub epsilon: f64,
    pub delta: f64,
}

/// `n` is the dataset size; it enters the Gaussian branch only.
///
/// Gaussian: ε ≈ ηT(c+σ)/(τn) + √(ηT·ln(1/δ)/τ · (c⁴/(n⁴σ³) + c²/(n²σ) + σ)),
/// δ ≈ T(c/n + σ)/τ + δ.
/// Laplace with ε₀ = c/b: ε ≈ ηTε₀(e^{ε₀}−1)/τ + ε₀√(ηT·ln(1/δ)/τ), δ unchanged.
pub fn asymptotic_epsilon(config: &AccountantConfig, n: u64) -> Result<AsymptoticEstimate> {
    config.validate()?;
    if !(config.tau > 0.0) || n == 0 {
        return Err(Error::contract(
            "asymptotic estimate needs tau > 0 and n >= 1",
        ));
    }
    let (eta, t, tau) = (config.eta, config.iterations as f64, config.tau);
    let (c, sigma, delta) = (config.sensitivity, config.sigma, config.delta);
    let log_inv_delta = -delta.ln();
    Ok(match config.family {
        NoiseFamily::Gaussian => {
            let n = n as f64;
            let drift = eta * t * (c + sigma) / (tau * n);
            let spread = c.powi(4) / (n.powi(4) * sigma.powi(3)) + c * c / (n * n * sigma) + sigma;
            AsymptoticEstimate {
                epsilon: drift + (eta * t * log_inv_delta / tau * spread).sqrt(),
                delta: t * (c / n + sigma) / tau + delta,
            }
        }
        NoiseFamily::Laplace => {
            let eps0 = c / sigma;
            AsymptoticEstimate {
                epsilon: eta * t * eps0 * eps0.exp_m1() / tau
                    + eps0 * (eta * t * log_inv_delta / tau).sqrt(),
                delta,
            }
        }
    })
}
