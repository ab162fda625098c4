use serde::{Deserialize, Serialize};

use crate::accountant::AccountantConfig;
use crate::clipping::ClipConfig;
use crate::error::{Error, Result};
use crate::kernel::NoiseFamily;
use crate::scalar::Scalar;

/// How per-sample clipped gradients are combined into G.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// G = Σ clipped gradients.
    #[default]
    Sum,
    /// G = Σ clipped gradients / (nq).
    Mean,
}

/// Mixing weights α_k(j).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaMode {
    /// i.i.d. U[0, 1] per coordinate.
    #[default]
    Uniform,
    /// The same constant for every coordinate; 1 disables mixing.
    Fixed(f64),
}

/// Mixing threshold τ_k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TauSchedule {
    Constant(f64),
    /// `(end_fraction, tau)` segments: τ applies while k/T < end_fraction.
    Piecewise(Vec<(f64, f64)>),
}

impl Default for TauSchedule {
    fn default() -> Self {
        TauSchedule::Constant(0.0)
    }
}

impl TauSchedule {
    pub fn validate(&self) -> Result<()> {
        match self {
            TauSchedule::Constant(t) if *t >= 0.0 && t.is_finite() => Ok(()),
            TauSchedule::Constant(t) => {
                Err(Error::contract(format!("tau must be nonnegative, got {t}")))
            }
            TauSchedule::Piecewise(segs) => {
                if segs.is_empty() {
                    return Err(Error::contract("piecewise tau schedule is empty"));
                }
                if segs.iter().any(|(_, t)| !(*t >= 0.0 && t.is_finite())) {
                    return Err(Error::contract("tau values must be nonnegative"));
                }
                if segs.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                    return Err(Error::contract("tau segment ends must increase"));
                }
                if segs.last().unwrap().0 < 1.0 {
                    return Err(Error::contract("tau schedule must cover the whole run"));
                }
                Ok(())
            }
        }
    }

    /// τ at iteration `k` (0-based) of a `total`-step run.
    pub fn tau_at(&self, k: u64, total: u64) -> f64 {
        match self {
            TauSchedule::Constant(t) => *t,
            TauSchedule::Piecewise(segs) => {
                let frac = if total == 0 {
                    0.0
                } else {
                    k as f64 / total as f64
                };
                segs.iter()
                    .find(|(end, _)| frac < *end)
                    .unwrap_or_else(|| segs.last().unwrap())
                    .1
            }
        }
    }

    /// Smallest τ of the schedule.
    pub fn min_tau(&self) -> f64 {
        match self {
            TauSchedule::Constant(t) => *t,
            TauSchedule::Piecewise(segs) => segs.iter().map(|s| s.1).fold(f64::INFINITY, f64::min),
        }
    }
}

/// Hyper-parameters shared by the private optimizers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixConfig<T> {
    pub eta: T,
    pub clip: ClipConfig<T>,
    #[serde(default)]
    pub tau: TauSchedule,
    pub q: f64,
    pub sigma: T,
    #[serde(rename = "T")]
    pub iterations: u64,
    pub seed: u64,
    #[serde(default)]
    pub aggregation: Aggregation,
    #[serde(default)]
    pub alpha: AlphaMode,
}

impl<T: Scalar> MixConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > T::zero()) {
            return Err(Error::contract("eta must be positive"));
        }
        if !(self.clip.c > T::zero()) || self.clip.p == 0 {
            return Err(Error::contract("clipping needs c > 0 and p >= 1"));
        }
        if !(0.0..=1.0).contains(&self.q) {
            return Err(Error::contract(format!(
                "q must lie in [0,1], got {}",
                self.q
            )));
        }
        if !(self.sigma >= T::zero()) {
            return Err(Error::contract("sigma must be nonnegative"));
        }
        if let AlphaMode::Fixed(a) = self.alpha {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::contract(format!(
                    "fixed alpha must lie in [0,1], got {a}"
                )));
            }
        }
        self.tau.validate()
    }

    /// The mechanism this run releases, in the units the accountant expects.
    ///
    /// A piecewise schedule is accounted at its smallest τ.
    pub fn accountant_config(&self, n: usize, delta: f64) -> Result<AccountantConfig> {
        self.validate()?;
        let c = self.clip.c.to_f64_lossy();
        let sensitivity = match self.aggregation {
            Aggregation::Sum => c,
            Aggregation::Mean => c / (n as f64 * self.q),
        };
        let cfg = AccountantConfig {
            q: self.q,
            sigma: self.sigma.to_f64_lossy(),
            sensitivity,
            p: self.clip.p,
            tau: self.tau.min_tau(),
            eta: self.eta.to_f64_lossy(),
            iterations: self.iterations,
            delta,
            family: NoiseFamily::Gaussian,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
