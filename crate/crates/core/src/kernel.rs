//! One-dimensional mixture noise laws: Gaussian or Laplace base noise
//! convolved with a centred uniform `U[−W, W]`.
//!
//! These are the per-coordinate output distributions of one ModelMix step
//! expressed in gradient units: the base noise is the injected DP noise, the
//! uniform comes from mixing two iterates at least τ apart (W = τ/(2η)).

use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::special::{log_normal_interval, normal_upper_quantile, LN_SQRT_2PI};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseFamily {
    Gaussian,
    Laplace,
}

impl std::fmt::Display for NoiseFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NoiseFamily::Gaussian => f.write_str("gaussian"),
            NoiseFamily::Laplace => f.write_str("laplace"),
        }
    }
}

impl std::str::FromStr for NoiseFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(NoiseFamily::Gaussian),
            "laplace" => Ok(NoiseFamily::Laplace),
            other => Err(Error::contract(format!("unknown noise family '{other}'"))),
        }
    }
}

/// Base noise of given scale, shifted by `shift`, convolved with `U[−halfwidth, halfwidth]`.
///
/// `scale` is the standard deviation for the Gaussian family and the Laplace
/// scale `b = 1/λ` for the Laplace family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureKernel {
    pub family: NoiseFamily,
    pub scale: f64,
    pub shift: f64,
    pub halfwidth: f64,
}

impl MixtureKernel {
    pub fn new(family: NoiseFamily, scale: f64, shift: f64, halfwidth: f64) -> Result<Self> {
        let kernel = Self {
            family,
            scale,
            shift,
            halfwidth,
        };
        kernel.validate()?;
        Ok(kernel)
    }

    pub fn gaussian(sigma: f64, shift: f64, halfwidth: f64) -> Result<Self> {
        Self::new(NoiseFamily::Gaussian, sigma, shift, halfwidth)
    }

    pub fn laplace(scale: f64, shift: f64, halfwidth: f64) -> Result<Self> {
        Self::new(NoiseFamily::Laplace, scale, shift, halfwidth)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::contract(format!(
                "kernel scale must be positive, got {}",
                self.scale
            )));
        }
        if !(self.halfwidth >= 0.0 && self.halfwidth.is_finite()) {
            return Err(Error::contract(format!(
                "kernel halfwidth must be nonnegative, got {}",
                self.halfwidth
            )));
        }
        if !self.shift.is_finite() {
            return Err(Error::contract("kernel shift must be finite"));
        }
        Ok(())
    }

    /// Same law moved to a new centre.
    pub fn with_shift(&self, shift: f64) -> Self {
        Self { shift, ..*self }
    }

    pub fn pdf(&self, o: f64) -> Result<f64> {
        check_finite(o)?;
        let x = (o - self.shift).abs();
        let (s, w) = (self.scale, self.halfwidth);
        Ok(match self.family {
            NoiseFamily::Gaussian if w == 0.0 => {
                let z = x / s;
                (-0.5 * z * z - LN_SQRT_2PI).exp() / s
            }
            NoiseFamily::Gaussian => {
                // [N((x+W)/s) − N((x−W)/s)] / 2W, differenced in the far tail via erfcx
                log_normal_interval((x - w) / s, (x + w) / s).exp() / (2.0 * w)
            }
            NoiseFamily::Laplace if w == 0.0 => (-x / s).exp() / (2.0 * s),
            NoiseFamily::Laplace => {
                let lambda = 1.0 / s;
                if x < w {
                    (-(-lambda * (w + x)).exp_m1() - (-lambda * (w - x)).exp_m1()) / (4.0 * w)
                } else {
                    (-lambda * (x - w)).exp() * -(-2.0 * lambda * w).exp_m1() / (4.0 * w)
                }
            }
        })
    }

    /// ln pdf, finite far into both tails.
    pub fn log_pdf(&self, o: f64) -> f64 {
        let x = (o - self.shift).abs();
        let (s, w) = (self.scale, self.halfwidth);
        match self.family {
            NoiseFamily::Gaussian if w == 0.0 => {
                let z = x / s;
                -0.5 * z * z - LN_SQRT_2PI - s.ln()
            }
            NoiseFamily::Gaussian => log_normal_interval((x - w) / s, (x + w) / s) - (2.0 * w).ln(),
            NoiseFamily::Laplace if w == 0.0 => -x / s - LN_2 - s.ln(),
            NoiseFamily::Laplace => {
                let lambda = 1.0 / s;
                if x < w {
                    let inner = -(-lambda * (w + x)).exp_m1() - (-lambda * (w - x)).exp_m1();
                    inner.ln() - (4.0 * w).ln()
                } else {
                    -lambda * (x - w) + (-(-2.0 * lambda * w).exp_m1()).ln() - (4.0 * w).ln()
                }
            }
        }
    }

    /// Interval `[lo, hi]` symmetric about `shift` outside of which at most
    /// `mass_tol` probability lies.
    pub fn support_window(&self, mass_tol: f64) -> Result<(f64, f64)> {
        if !(mass_tol > 0.0 && mass_tol < 1.0) {
            return Err(Error::contract(format!(
                "mass_tol must lie in (0,1), got {mass_tol}"
            )));
        }
        // P(|base + U| > W + t) ≤ P(|base| > t); each side gets half the budget.
        let reach = match self.family {
            NoiseFamily::Gaussian => self.scale * normal_upper_quantile(0.5 * mass_tol),
            NoiseFamily::Laplace => self.scale * (1.0 / mass_tol).ln(),
        };
        let half = self.halfwidth + reach;
        Ok((self.shift - half, self.shift + half))
    }

    /// Points where the density or its derivative changes behaviour.
    pub fn landmarks(&self) -> [f64; 3] {
        [
            self.shift - self.halfwidth,
            self.shift,
            self.shift + self.halfwidth,
        ]
    }
}

/// ln(pdf(p1, o) / pdf(p0, o)).
///
/// For two pure Gaussians of equal scale the ratio is evaluated in closed form,
/// which keeps it exact at the far offsets that high-order moments probe.
pub fn log_likelihood_ratio(p1: &MixtureKernel, p0: &MixtureKernel, o: f64) -> f64 {
    if p1.family == NoiseFamily::Gaussian
        && p0.family == NoiseFamily::Gaussian
        && p1.halfwidth == 0.0
        && p0.halfwidth == 0.0
        && p1.scale == p0.scale
    {
        let d = p1.shift - p0.shift;
        return d * (2.0 * (o - p0.shift) - d) / (2.0 * p0.scale * p0.scale);
    }
    p1.log_pdf(o) - p0.log_pdf(o)
}

/// Draw from a kernel given one standard-uniform for the mixing term and one
/// base-noise variate already scaled to unit scale.
pub(crate) fn compose_sample(kernel: &MixtureKernel, unit_base: f64, uniform01: f64) -> f64 {
    kernel.shift + kernel.scale * unit_base + kernel.halfwidth * (2.0 * uniform01 - 1.0)
}

fn check_finite(o: f64) -> Result<()> {
    if o.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "density evaluated at non-finite point {o}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, QuadratureOptions};

    fn gauss(s: f64, m: f64, w: f64) -> MixtureKernel {
        MixtureKernel::gaussian(s, m, w).unwrap()
    }

    fn lap(s: f64, m: f64, w: f64) -> MixtureKernel {
        MixtureKernel::laplace(s, m, w).unwrap()
    }

    #[test]
    fn standard_normal_peak() {
        let k = gauss(1.0, 0.0, 0.0);
        let v = k.pdf(0.0).unwrap();
        assert!((v - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-15);
        assert!((v - 0.39894).abs() < 1e-5);
    }

    #[test]
    fn rejects_bad_parameters_and_inputs() {
        assert!(MixtureKernel::gaussian(0.0, 0.0, 1.0).is_err());
        assert!(MixtureKernel::gaussian(1.0, 0.0, -1.0).is_err());
        let k = gauss(1.0, 0.0, 1.0);
        assert!(matches!(k.pdf(f64::NAN), Err(Error::Domain(_))));
        assert!(matches!(k.pdf(f64::INFINITY), Err(Error::Domain(_))));
        assert!(k.support_window(0.0).is_err());
        assert!(k.support_window(1.0).is_err());
    }

    #[test]
    fn gaussian_convolution_matches_direct_quadrature() {
        // ∫ N(0.5 − a; 1, 2)·U(a; −3, 3) da
        let k = gauss(2.0, 1.0, 3.0);
        let o: f64 = 0.5;
        let f = |a: f64| {
            let z = (o - a - 1.0) / 2.0;
            (-0.5 * z * z).exp() / (2.0 * (2.0 * std::f64::consts::PI).sqrt()) / 6.0
        };
        let (direct, _, _) = integrate(&f, -3.0, 3.0, &[], &QuadratureOptions::default());
        assert!((k.pdf(o).unwrap() - direct).abs() < 1e-10);
    }

    #[test]
    fn laplace_branches_are_continuous() {
        let k = lap(0.7, 0.3, 2.0);
        for seam in [k.shift - k.halfwidth, k.shift + k.halfwidth] {
            let left = k.pdf(seam - 1e-13).unwrap();
            let right = k.pdf(seam + 1e-13).unwrap();
            assert!((left - right).abs() < 1e-12);
            let expected = -(-2.0 * k.halfwidth / k.scale).exp_m1() / (4.0 * k.halfwidth);
            assert!((k.pdf(seam).unwrap() - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn laplace_matches_appendix_piecewise_form() {
        // Lap(λ) * U[0, τ̄] in uncentred form, then shifted onto our centring
        let (lambda, tbar) = (1.3_f64, 4.0_f64);
        let k = lap(1.0 / lambda, tbar / 2.0, tbar / 2.0);
        let reference = |o: f64| {
            if o <= 0.0 {
                (-lambda * o.abs()).exp() * (1.0 - (-lambda * tbar).exp()) / (2.0 * tbar)
            } else if o < tbar {
                (2.0 - (-lambda * o).exp() - (-lambda * (tbar - o)).exp()) / (2.0 * tbar)
            } else {
                (-lambda * (o - tbar)).exp() * (1.0 - (-lambda * tbar).exp()) / (2.0 * tbar)
            }
        };
        for &o in &[-3.0, -0.1, 0.0, 0.5, 2.0, 3.9, 4.0, 7.5] {
            assert!((k.pdf(o).unwrap() - reference(o)).abs() < 1e-14, "o={o}");
        }
    }

    #[test]
    fn log_pdf_consistent_with_pdf() {
        for k in [
            gauss(1.5, 0.2, 2.0),
            gauss(1.0, 0.0, 0.0),
            lap(0.8, -1.0, 1.5),
            lap(1.0, 0.0, 0.0),
        ] {
            let reach = k.halfwidth + 6.0 * k.scale;
            for i in 0..=200 {
                let o = k.shift - reach + 2.0 * reach * i as f64 / 200.0;
                let p = k.pdf(o).unwrap();
                let lp = k.log_pdf(o);
                assert!(
                    (lp.exp() - p).abs() <= 1e-12 * p,
                    "{k:?} at {o}: {} vs {p}",
                    lp.exp()
                );
            }
        }
    }

    #[test]
    fn gaussian_log_density_is_quadratic() {
        let k = gauss(1.0, 0.0, 0.0);
        for &o in &[0.5, 3.0, 30.0] {
            let d = k.log_pdf(o) - k.log_pdf(0.0);
            assert!((d + o * o / 2.0).abs() < 1e-12 * (1.0 + o * o));
        }
    }

    #[test]
    fn far_tail_stays_finite() {
        let p0 = gauss(1.0, 0.0, 3.0);
        let p1 = p0.with_shift(1.0);
        let o = p0.halfwidth + 40.0;
        let r = log_likelihood_ratio(&p1, &p0, o);
        assert!(r.is_finite());
        // beyond the uniform edge the ratio approaches the Gaussian slope
        assert!(r > 0.0 && r < 2.0 * (o - p0.halfwidth));
    }

    #[test]
    fn support_windows() {
        let (lo, hi) = gauss(1.0, 0.0, 0.0).support_window(1e-12).unwrap();
        assert!(lo <= -7.1 && hi >= 7.1);
        let (lo5, hi5) = gauss(1.0, 0.0, 5.0).support_window(1e-12).unwrap();
        assert!(((hi5 - lo5) - (hi - lo) - 10.0).abs() < 1e-12);
        let (_, hl) = lap(0.5, 0.0, 0.0).support_window(1e-6).unwrap();
        assert!((hl - 0.5 * (1e6_f64).ln()).abs() < 1e-12);
        // tail mass of the Laplace window is exactly the budget
        assert!(((-hl / 0.5_f64).exp() - 1e-6).abs() < 1e-18);
    }
}
