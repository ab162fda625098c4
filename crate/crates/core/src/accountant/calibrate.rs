use super::compose::compose_to_dp;
use super::config::AccountantConfig;
use super::rdp::{rdp_curve, OrderGrid};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationOptions {
    /// Accept σ once |ε(σ) − target| ≤ `rel_tol`·target.
    pub rel_tol: f64,
    /// Search σ in [lo_factor·s, hi_factor·s].
    pub lo_factor: f64,
    pub hi_factor: f64,
    pub max_iter: usize,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-3,
            lo_factor: 1e-4,
            hi_factor: 1e4,
            max_iter: 200,
        }
    }
}

/// Final ε of `config` at its own T and δ.
pub fn epsilon_at(config: &AccountantConfig, grid: &OrderGrid) -> Result<f64> {
    let curve = rdp_curve(config, grid)?;
    Ok(compose_to_dp(&curve, config.iterations, config.delta)?.epsilon)
}

/// The noise scale at which the accountant reports `target_eps`; `config.sigma` is ignored.
pub fn calibrate_sigma(
    target_eps: f64,
    config: &AccountantConfig,
    grid: &OrderGrid,
) -> Result<f64> {
    calibrate_sigma_with(target_eps, config, grid, &CalibrationOptions::default())
}

pub fn calibrate_sigma_with(
    target_eps: f64,
    config: &AccountantConfig,
    grid: &OrderGrid,
    opts: &CalibrationOptions,
) -> Result<f64> {
    if !(target_eps > 0.0 && target_eps.is_finite()) {
        return Err(Error::contract(format!(
            "target epsilon must be positive, got {target_eps}"
        )));
    }
    let s = config.sensitivity;
    let eval = |sigma: f64| epsilon_at(&config.with_sigma(sigma), grid);
    let (mut lo, mut hi) = (opts.lo_factor * s, opts.hi_factor * s);
    let (mut e_lo, mut e_hi) = (eval(lo)?, eval(hi)?);
    if !(e_lo >= target_eps && target_eps >= e_hi) {
        return Err(Error::Calibration(format!(
            "target eps {target_eps} outside [{e_hi}, {e_lo}] reachable for sigma in [{lo:e}, {hi:e}]"
        )));
    }
    for _ in 0..opts.max_iter {
        let mid = (lo * hi).sqrt();
        let e_mid = eval(mid)?;
        if !(e_mid <= e_lo && e_mid >= e_hi) {
            return Err(Error::Calibration(format!(
                "epsilon not monotone in sigma near {mid:e}: {e_lo} / {e_mid} / {e_hi}"
            )));
        }
        if (e_mid - target_eps).abs() <= opts.rel_tol * target_eps {
            return Ok(mid);
        }
        if e_mid > target_eps {
            lo = mid;
            e_lo = e_mid;
        } else {
            hi = mid;
            e_hi = e_mid;
        }
    }
    Err(Error::Calibration(format!(
        "no sigma within {} relative of eps {target_eps} after {} bisections",
        opts.rel_tol, opts.max_iter
    )))
}
