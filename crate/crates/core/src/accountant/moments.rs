use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{log_likelihood_ratio, MixtureKernel};
use crate::quadrature::{integrate_log, QuadratureOptions};

pub(crate) fn check_pair(p0: &MixtureKernel, p1: &MixtureKernel) -> Result<()> {
    p0.validate()?;
    p1.validate()?;
    if p0.family != p1.family || p0.scale != p1.scale || p0.halfwidth != p1.halfwidth {
        return Err(Error::contract(
            "moment kernels must share family, scale and halfwidth",
        ));
    }
    Ok(())
}

/// Candidate peak and kink locations of `P0·(P1/P0)^t`.
pub(crate) fn moment_hints(p0: &MixtureKernel, p1: &MixtureKernel, t: f64) -> Vec<f64> {
    let d = p1.shift - p0.shift;
    let edge = p0.shift + d.signum() * p0.halfwidth;
    let mut hints = Vec::with_capacity(8);
    hints.extend_from_slice(&p0.landmarks());
    hints.extend_from_slice(&p1.landmarks());
    hints.push(edge + t * d);
    hints.push(p0.shift + t * d);
    hints
}

/// Quadrature options whose noise floor reflects the size of the two terms
/// `ln P0` and `t·ln(P1/P0)` that cancel at the integrand's peak.
pub(crate) fn quadrature_options(
    p0: &MixtureKernel,
    p1: &MixtureKernel,
    t: f64,
    hints: &[f64],
) -> QuadratureOptions {
    let magnitude = hints
        .iter()
        .map(|&o| p0.log_pdf(o).abs() + t * log_likelihood_ratio(p1, p0, o).abs())
        .fold(0.0, f64::max);
    QuadratureOptions {
        noise_nats: 4.0 * f64::EPSILON * magnitude,
        ..QuadratureOptions::default()
    }
}

/// ln A_k = ln E_{z∼P0}[(P1(z)/P0(z))^k].
///
/// Orders 0 and 1 return exactly 0 without integrating.
pub fn log_moment(p0: &MixtureKernel, p1: &MixtureKernel, k: u32) -> Result<f64> {
    check_pair(p0, p1)?;
    if k <= 1 {
        return Ok(0.0);
    }
    let kf = k as f64;
    let g = |o: f64| p0.log_pdf(o) + kf * log_likelihood_ratio(p1, p0, o);
    let hints = moment_hints(p0, p1, kf);
    let opts = quadrature_options(p0, p1, kf, &hints);
    let r = integrate_log(&g, &hints, p0.scale, &opts)?;
    // A_k ≥ 1 by Jensen; clamp the rounding residue for tiny shifts
    Ok(r.log_value.max(0.0))
}

/// A_k itself; overflows to +∞ for very large log-moments.
pub fn moment_a_k(p0: &MixtureKernel, p1: &MixtureKernel, k: u32) -> Result<f64> {
    log_moment(p0, p1, k).map(f64::exp)
}

/// `[ln A_0, ln A_1, …, ln A_kmax]`, evaluated in parallel.
pub fn log_moments(p0: &MixtureKernel, p1: &MixtureKernel, kmax: u32) -> Result<Vec<f64>> {
    check_pair(p0, p1)?;
    (0..=kmax)
        .into_par_iter()
        .map(|k| log_moment(p0, p1, k))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_orders_are_exactly_one() {
        let p0 = MixtureKernel::gaussian(1.0, 0.0, 2.0).unwrap();
        let p1 = p0.with_shift(1.0);
        assert_eq!(moment_a_k(&p0, &p1, 0).unwrap(), 1.0);
        assert_eq!(moment_a_k(&p0, &p1, 1).unwrap(), 1.0);
    }

    #[test]
    fn gaussian_closed_form() {
        let p0 = MixtureKernel::gaussian(0.8, 0.0, 0.0).unwrap();
        let p1 = p0.with_shift(1.3);
        for k in [2u32, 5, 17, 64, 256] {
            let exact = (k * (k - 1)) as f64 * 1.3 * 1.3 / (2.0 * 0.8 * 0.8);
            let got = log_moment(&p0, &p1, k).unwrap();
            assert!(
                (got - exact).abs() <= 1e-10 * exact,
                "k={k}: {got} vs {exact}"
            );
        }
    }

    #[test]
    fn mixing_shrinks_moments() {
        let base = MixtureKernel::gaussian(1.0, 0.0, 0.0).unwrap();
        let mixed = MixtureKernel::gaussian(1.0, 0.0, 2.0).unwrap();
        for k in [2u32, 4, 10] {
            let a = log_moment(&base, &base.with_shift(1.0), k).unwrap();
            let b = log_moment(&mixed, &mixed.with_shift(1.0), k).unwrap();
            assert!(b < a);
        }
    }

    #[test]
    fn laplace_second_moment() {
        // E[(P1/P0)²] for pure Laplace(b) with shift d: (2e^{d/b} + e^{−2d/b})/3
        let b = 0.7;
        let d = 0.5;
        let p0 = MixtureKernel::laplace(b, 0.0, 0.0).unwrap();
        let p1 = p0.with_shift(d);
        let r = d / b;
        let exact = ((2.0 * r.exp() + (-2.0 * r).exp()) / 3.0).ln();
        let got = log_moment(&p0, &p1, 2).unwrap();
        assert!((got - exact).abs() < 1e-11, "{got} vs {exact}");
    }

    #[test]
    fn mismatched_pair_is_rejected() {
        let p0 = MixtureKernel::gaussian(1.0, 0.0, 0.0).unwrap();
        let p1 = MixtureKernel::gaussian(2.0, 1.0, 0.0).unwrap();
        assert!(matches!(log_moment(&p0, &p1, 2), Err(Error::Contract(_))));
    }
}
