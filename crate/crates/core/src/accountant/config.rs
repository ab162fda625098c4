use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{MixtureKernel, NoiseFamily};

/// Everything the accountant needs to know about one training run.
///
/// `sigma` and `sensitivity` are in the same units: for sum aggregation the
/// sensitivity is the clipping norm `c`; for mean aggregation it is `c/(nq)`.
/// For the Laplace family `sigma` is the Laplace scale and `sensitivity` an
/// l1 bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccountantConfig {
    pub q: f64,
    pub sigma: f64,
    pub sensitivity: f64,
    pub p: u32,
    pub tau: f64,
    pub eta: f64,
    #[serde(rename = "T")]
    pub iterations: u64,
    pub delta: f64,
    #[serde(default = "default_family")]
    pub family: NoiseFamily,
}

fn default_family() -> NoiseFamily {
    NoiseFamily::Gaussian
}

impl AccountantConfig {
    /// Plain subsampled mechanism: no mixing, no l∞ truncation.
    pub fn baseline(q: f64, sigma: f64, sensitivity: f64, iterations: u64, delta: f64) -> Self {
        Self {
            q,
            sigma,
            sensitivity,
            p: 1,
            tau: 0.0,
            eta: 1.0,
            iterations,
            delta,
            family: NoiseFamily::Gaussian,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Contract(m));
        if !(0.0..=1.0).contains(&self.q) {
            return fail(format!("q must lie in [0,1], got {}", self.q));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return fail(format!("sigma must be positive, got {}", self.sigma));
        }
        if !(self.sensitivity > 0.0 && self.sensitivity.is_finite()) {
            return fail(format!(
                "sensitivity must be positive, got {}",
                self.sensitivity
            ));
        }
        if self.p == 0 {
            return fail("p must be at least 1".into());
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return fail(format!("tau must be nonnegative, got {}", self.tau));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return fail(format!("eta must be positive, got {}", self.eta));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return fail(format!("delta must lie in (0,1), got {}", self.delta));
        }
        if self.family == NoiseFamily::Laplace && self.p != 1 {
            return fail(
                "l-infinity truncation (p > 1) is only defined for the gaussian family".into(),
            );
        }
        Ok(())
    }

    /// W = τ/(2η).
    pub fn halfwidth(&self) -> f64 {
        self.tau / (2.0 * self.eta)
    }

    /// Per-coordinate shift s/√p.
    pub fn coordinate_shift(&self) -> f64 {
        self.sensitivity / (self.p as f64).sqrt()
    }

    /// (P0, P1) for one coordinate.
    pub fn kernels(&self) -> Result<(MixtureKernel, MixtureKernel)> {
        self.validate()?;
        let p0 = MixtureKernel::new(self.family, self.sigma, 0.0, self.halfwidth())?;
        Ok((p0, p0.with_shift(self.coordinate_shift())))
    }

    pub fn with_sigma(&self, sigma: f64) -> Self {
        Self { sigma, ..*self }
    }
}
