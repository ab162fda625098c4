use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::AccountantConfig;
use super::moments::{log_moments, moment_hints, quadrature_options};
use crate::error::{Error, Result};
use crate::kernel::log_likelihood_ratio;
use crate::quadrature::integrate_log;
use crate::special::{log1p_exp, log_add_exp, log_binomial, log_expm1, log_sum_exp};

/// Orders at which the per-step divergence is tabulated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OrderGrid {
    orders: Vec<f64>,
}

impl OrderGrid {
    /// Sorts, deduplicates and checks every order exceeds 1.
    pub fn new(mut orders: Vec<f64>) -> Result<Self> {
        if orders.is_empty() {
            return Err(Error::contract("order grid is empty"));
        }
        if orders.iter().any(|a| !(*a > 1.0 && a.is_finite())) {
            return Err(Error::contract(
                "every Rényi order must be finite and greater than 1",
            ));
        }
        orders.sort_by(f64::total_cmp);
        orders.dedup();
        Ok(Self { orders })
    }

    /// {2, …, 64} ∪ {96, 128, 192, 256}.
    pub fn integer_default() -> Self {
        let mut orders: Vec<f64> = (2..=64).map(f64::from).collect();
        orders.extend([96.0, 128.0, 192.0, 256.0]);
        Self { orders }
    }

    /// The integer grid plus 1.1, 1.2, …, 10.9.
    ///
    /// Fractional orders are only evaluated for mechanisms with p = 1.
    pub fn with_fractional() -> Self {
        let mut orders: Vec<f64> = (11..110)
            .filter(|i| i % 10 != 0)
            .map(|i| i as f64 / 10.0)
            .collect();
        orders.extend(Self::integer_default().orders);
        Self::new(orders).expect("static grid is valid")
    }

    pub fn orders(&self) -> &[f64] {
        &self.orders
    }

    fn max_integer(&self) -> u32 {
        self.orders
            .iter()
            .filter_map(|&a| as_integer_order(a))
            .max()
            .unwrap_or(0)
    }
}

impl Default for OrderGrid {
    fn default() -> Self {
        Self::integer_default()
    }
}

fn as_integer_order(a: f64) -> Option<u32> {
    (a.fract() == 0.0 && a >= 2.0 && a <= u32::MAX as f64).then_some(a as u32)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RdpEntry {
    pub alpha: f64,
    pub eps: f64,
}

/// Per-step Rényi divergence, nats, at increasing orders.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RdpCurve {
    pub entries: Vec<RdpEntry>,
}

impl RdpCurve {
    pub fn new(mut entries: Vec<RdpEntry>) -> Result<Self> {
        entries.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
        if entries.windows(2).any(|w| w[0].alpha == w[1].alpha) {
            return Err(Error::contract("duplicate order in RDP curve"));
        }
        if entries
            .iter()
            .any(|e| !(e.alpha > 1.0) || !e.eps.is_finite() || e.eps < 0.0)
        {
            return Err(Error::contract(
                "RDP entries need order > 1 and finite nonnegative loss",
            ));
        }
        Ok(Self { entries })
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }
}

/// D_α of `(1−q)·P0 + q·P1` against `P0` for integer α from tabulated log-moments.
///
/// `log_moments[k]` is ln A_k of a single coordinate and `power` the number
/// of independent coordinates (p). Evaluated as
/// `ln(1 + Σ_{k≥2} C(α,k)(1−q)^{α−k} q^k (A_k^p − 1)) / (α−1)`,
/// which equals the plain binomial sum because the k = 0, 1 excess terms vanish.
pub fn binomial_divergence(alpha: u32, q: f64, power: f64, log_moments: &[f64]) -> Result<f64> {
    if alpha < 2 {
        return Err(Error::contract("integer route needs alpha >= 2"));
    }
    if log_moments.len() <= alpha as usize {
        return Err(Error::contract(format!(
            "need log-moments up to order {alpha}, got {}",
            log_moments.len().saturating_sub(1)
        )));
    }
    let am1 = (alpha - 1) as f64;
    if q == 0.0 {
        return Ok(0.0);
    }
    if q == 1.0 {
        return Ok(power * log_moments[alpha as usize] / am1);
    }
    let (lq, l1q) = (q.ln(), (-q).ln_1p());
    let terms: Vec<f64> = (2..=alpha)
        .filter_map(|k| {
            let x = power * log_moments[k as usize];
            (x > 0.0).then(|| {
                log_binomial(alpha, k) + (alpha - k) as f64 * l1q + k as f64 * lq + log_expm1(x)
            })
        })
        .collect();
    Ok(log1p_exp(log_sum_exp(&terms)) / am1)
}

/// Per-step divergence at an integer order ≥ 2.
pub fn rdp_step(config: &AccountantConfig, alpha: u32) -> Result<f64> {
    let (p0, p1) = config.kernels()?;
    if alpha < 2 {
        return Err(Error::contract("integer route needs alpha >= 2"));
    }
    if config.q == 0.0 {
        return Ok(0.0);
    }
    let lm = log_moments(&p0, &p1, alpha)?;
    binomial_divergence(alpha, config.q, config.p as f64, &lm)
}

/// Per-step divergence at any real order > 1, by direct quadrature of
/// `E_{P0}[((1−q) + q·P1/P0)^α]`. Requires p = 1.
pub fn rdp_step_fractional(config: &AccountantConfig, alpha: f64) -> Result<f64> {
    let (p0, p1) = config.kernels()?;
    if !(alpha > 1.0 && alpha.is_finite()) {
        return Err(Error::contract(format!("order must exceed 1, got {alpha}")));
    }
    if config.p != 1 {
        return Err(Error::contract("direct route handles p = 1 only"));
    }
    let q = config.q;
    if q == 0.0 {
        return Ok(0.0);
    }
    let (lq, l1q) = (q.ln(), (-q).ln_1p());
    let g = |o: f64| {
        let lr = log_likelihood_ratio(&p1, &p0, o);
        let mix = if lr < 30.0 {
            (q * lr.exp_m1()).ln_1p()
        } else {
            log_add_exp(l1q, lq + lr)
        };
        p0.log_pdf(o) + alpha * mix
    };
    let hints = moment_hints(&p0, &p1, alpha);
    let opts = quadrature_options(&p0, &p1, alpha, &hints);
    let r = integrate_log(&g, &hints, p0.scale, &opts)?;
    Ok((r.log_value / (alpha - 1.0)).max(0.0))
}

/// Tabulates the per-step divergence over `grid`.
///
/// Integer orders go through the moment expansion; non-integer orders use the
/// direct route when p = 1 and are skipped otherwise.
pub fn rdp_curve(config: &AccountantConfig, grid: &OrderGrid) -> Result<RdpCurve> {
    let (p0, p1) = config.kernels()?;
    let kmax = grid.max_integer();
    let lm = if kmax >= 2 && config.q > 0.0 {
        log_moments(&p0, &p1, kmax)?
    } else {
        vec![0.0; kmax as usize + 1]
    };
    let entries: Vec<Option<RdpEntry>> = grid
        .orders()
        .par_iter()
        .map(|&alpha| -> Result<Option<RdpEntry>> {
            let eps = match as_integer_order(alpha) {
                Some(a) => binomial_divergence(a, config.q, config.p as f64, &lm)?,
                None if config.p == 1 => rdp_step_fractional(config, alpha)?,
                None => return Ok(None),
            };
            Ok(Some(RdpEntry { alpha, eps }))
        })
        .collect::<Result<_>>()?;
    RdpCurve::new(entries.into_iter().flatten().collect())
}
