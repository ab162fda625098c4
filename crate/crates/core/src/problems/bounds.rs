use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inputs of the convex-case utility bound. Noise moments are per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thm31Params {
    /// sup ‖w − w*‖ over the iterates.
    pub w0: f64,
    pub lipschitz: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: f64,
    pub q: f64,
    pub n: f64,
    pub d: f64,
    /// E‖Δ‖².
    pub noise_sq_mean: f64,
    /// E‖Δ‖.
    pub noise_mean: f64,
    /// τ_1, …, τ_T.
    pub taus: Vec<f64>,
}

/// Explicit right-hand side of the convex bound on E[F(w̄) − F(w*)].
pub fn thm31_bound(p: &Thm31Params) -> Result<f64> {
    let l = p
        .lipschitz
        .ok_or_else(|| Error::contract("convex bound needs a Lipschitz constant"))?;
    let beta = p
        .beta
        .ok_or_else(|| Error::contract("convex bound needs a smoothness constant"))?;
    if p.taus.is_empty() || !(p.gamma > 0.0 && p.q > 0.0 && p.n > 0.0) {
        return Err(Error::contract(
            "convex bound needs T >= 1 and positive gamma, q, n",
        ));
    }
    let t = p.taus.len() as f64;
    let root_t = t.sqrt();
    let (w0, g, q, n) = (p.w0, p.gamma, p.q, p.n);
    let mix: f64 = p.taus.iter().map(|tau| p.d * tau * tau / 12.0).sum();
    let first = (3.0 * w0 * w0 + mix) / (2.0 * g * root_t);
    let second = g * (l * l / (q * q) + p.noise_sq_mean / (n * n * q * q)) / root_t;
    let smooth = 12.0 * w0 * w0 / (8.0 * t)
        + 2.0 * g * w0 * (l + p.noise_mean / n) / (q * t.powf(1.5))
        + 11.0 * g * g * (l * l + p.noise_sq_mean / (n * n)) / (8.0 * t * q * q);
    Ok(first + second + beta * smooth)
}

/// Inputs of the non-convex clipped bound. `v` is the noise-mechanism constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thm32Params {
    pub c: f64,
    pub beta: Option<f64>,
    pub d: f64,
    pub n: f64,
    pub q: f64,
    pub eps: f64,
    pub delta: f64,
    /// sup F − inf F.
    pub r_f: f64,
    /// ‖w_0 − w_{−1}‖.
    pub w0_tilde: f64,
    pub v: f64,
    pub taus: Vec<f64>,
}

/// (Σ min{9/20·‖∇F‖², c/20·‖∇F‖}/T over the logged full-batch gradient
/// norms, explicit right-hand side of the clipped non-convex bound).
pub fn thm32_metric_and_bound(grad_norms: &[f64], p: &Thm32Params) -> Result<(f64, f64)> {
    let beta = p
        .beta
        .ok_or_else(|| Error::contract("non-convex bound needs a smoothness constant"))?;
    if grad_norms.is_empty() {
        return Err(Error::contract("trajectory is empty"));
    }
    if !(p.c > 0.0 && p.n > 0.0 && p.q > 0.0 && p.eps > 0.0 && p.r_f > 0.0)
        || !(p.delta > 0.0 && p.delta < 1.0)
    {
        return Err(Error::contract(
            "non-convex bound needs positive c, n, q, eps, R_F and delta in (0,1)",
        ));
    }
    let metric = grad_norms
        .iter()
        .map(|&g| (0.45 * g * g).min(p.c / 20.0 * g))
        .sum::<f64>()
        / grad_norms.len() as f64;
    let ld = p.d * (-p.delta.ln());
    let ne = p.n * p.eps;
    let k = 101.0 / 12.0;
    let mix: f64 = p.taus.iter().map(|tau| p.d * tau * tau).sum::<f64>() / 12.0;
    let bound = (p.v / 2.0 + 2.5) * p.c * (p.r_f * k * beta * ld).sqrt() / ne
        + 28.0 * p.c * beta * ld * p.w0_tilde / (12.0 * p.q * ne * ne)
        + p.c * ld * k.sqrt() * beta.powf(1.5) / (p.q * ne * p.r_f.sqrt())
            * (mix + 21.0 * p.w0_tilde * p.w0_tilde / 24.0);
    Ok((metric, bound))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(t: usize) -> Thm31Params {
        Thm31Params {
            w0: 2.0,
            lipschitz: Some(1.5),
            beta: Some(1.0),
            gamma: 0.5,
            q: 0.1,
            n: 1000.0,
            d: 20.0,
            noise_sq_mean: 0.0,
            noise_mean: 0.0,
            taus: vec![0.0; t],
        }
    }

    #[test]
    fn missing_metadata_is_a_contract_error() {
        let mut p = params(10);
        p.beta = None;
        assert!(matches!(thm31_bound(&p), Err(Error::Contract(_))));
    }

    #[test]
    fn zero_gradient_trajectory_has_zero_metric() {
        let p = Thm32Params {
            c: 1.0,
            beta: Some(1.0),
            d: 5.0,
            n: 100.0,
            q: 0.1,
            eps: 1.0,
            delta: 1e-5,
            r_f: 1.0,
            w0_tilde: 0.0,
            v: 1.0,
            taus: vec![0.0; 4],
        };
        let (metric, bound) = thm32_metric_and_bound(&[0.0; 4], &p).unwrap();
        assert_eq!(metric, 0.0);
        assert!(bound > 0.0);
    }
}
