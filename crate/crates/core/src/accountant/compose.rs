use serde::{Deserialize, Serialize};

use super::rdp::RdpCurve;
use crate::error::{Error, Result};

/// An (ε, δ) guarantee and the Rényi order that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacySpend {
    #[serde(rename = "eps")]
    pub epsilon: f64,
    pub delta: f64,
    #[serde(rename = "alpha")]
    pub argmin_alpha: f64,
}

/// ε = min_α T·ε_α + ln(1/δ)/(α−1).
///
/// With `steps = 0` the minimum is attained at the largest stored order.
pub fn compose_to_dp(curve: &RdpCurve, steps: u64, delta: f64) -> Result<PrivacySpend> {
    if curve.is_empty() {
        return Err(Error::contract("cannot compose an empty RDP curve"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::contract(format!(
            "delta must lie in (0,1), got {delta}"
        )));
    }
    let log_inv_delta = -delta.ln();
    let t = steps as f64;
    let mut best = PrivacySpend {
        epsilon: f64::INFINITY,
        delta,
        argmin_alpha: f64::NAN,
    };
    for e in &curve.entries {
        let eps = t * e.eps + log_inv_delta / (e.alpha - 1.0);
        if eps <= best.epsilon {
            best.epsilon = eps;
            best.argmin_alpha = e.alpha;
        }
    }
    Ok(best)
}

/// [`compose_to_dp`] at each step count in `checkpoints`.
pub fn epsilon_trajectory(
    curve: &RdpCurve,
    checkpoints: &[u64],
    delta: f64,
) -> Result<Vec<PrivacySpend>> {
    checkpoints
        .iter()
        .map(|&t| compose_to_dp(curve, t, delta))
        .collect()
}

/// Total privacy of T adaptive (ε, δ)-DP steps under advanced composition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdvancedComposition {
    pub eps_total: f64,
    pub steps: u64,
    pub delta_tilde: f64,
}

impl AdvancedComposition {
    /// T·δ + δ̃ for a per-step δ.
    pub fn delta_total(&self, per_step_delta: f64) -> f64 {
        self.steps as f64 * per_step_delta + self.delta_tilde
    }
}

/// ε̃ = √(2T ln(1/δ̃))·ε + T·ε·(e^ε − 1).
pub fn advanced_composition(eps: f64, steps: u64, delta_tilde: f64) -> Result<AdvancedComposition> {
    if !(eps > 0.0 && eps.is_finite()) || steps == 0 || !(delta_tilde > 0.0 && delta_tilde < 1.0) {
        return Err(Error::contract(
            "advanced composition needs eps > 0, T >= 1, delta in (0,1)",
        ));
    }
    let t = steps as f64;
    let eps_total = (2.0 * t * (-delta_tilde.ln())).sqrt() * eps + t * eps * eps.exp_m1();
    Ok(AdvancedComposition {
        eps_total,
        steps,
        delta_tilde,
    })
}
