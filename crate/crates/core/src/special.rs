//! Special functions and log-domain arithmetic used by the kernels and the
//! accountant. `erf`/`erfc` come from `libm`; everything else is built on top.

use std::f64::consts::{FRAC_1_SQRT_2, LN_2, PI};

/// ln(sqrt(2π))
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Scaled complementary error function `exp(x²)·erfc(x)`.
pub fn erfcx(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 * exp_square(x) - erfcx(-x);
    }
    if x < 26.0 {
        return exp_square(x) * libm::erfc(x);
    }
    // Asymptotic series; at x ≥ 26 the ninth term is below 1e-19.
    let inv2x2 = 1.0 / (2.0 * x * x);
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 1..9 {
        term *= -((2 * n - 1) as f64) * inv2x2;
        sum += term;
    }
    sum / (x * PI.sqrt())
}

/// `exp(x²)` with the rounding error of `x²` folded back in.
fn exp_square(x: f64) -> f64 {
    let hi = x * x;
    let lo = x.mul_add(x, -hi);
    hi.exp() * (1.0 + lo)
}

/// Standard normal CDF.
pub fn normal_cdf(t: f64) -> f64 {
    0.5 * libm::erfc(-t * FRAC_1_SQRT_2)
}

/// ln Q(t) where Q is the standard normal upper tail.
pub fn log_normal_sf(t: f64) -> f64 {
    if t > 0.0 {
        (0.5 * erfcx(t * FRAC_1_SQRT_2)).ln() - 0.5 * t * t
    } else {
        (-0.5 * libm::erfc(-t * FRAC_1_SQRT_2)).ln_1p()
    }
}

/// ln(Φ(b) − Φ(a)) for a ≤ b, stable for intervals deep in either tail and
/// for very narrow intervals.
pub fn log_normal_interval(a: f64, b: f64) -> f64 {
    debug_assert!(a <= b);
    if a == b {
        return f64::NEG_INFINITY;
    }
    if b <= 0.0 {
        return log_normal_interval(-b, -a);
    }
    if a < 0.0 {
        // straddles zero: both erf terms are positive
        let mass = 0.5 * (libm::erf(b * FRAC_1_SQRT_2) + libm::erf(-a * FRAC_1_SQRT_2));
        return mass.ln();
    }
    // 0 ≤ a < b: Q(a) − Q(b) = ½·e^{−a²/2}·[erfcx(a') − erfcx(b')·e^{−(b²−a²)/2}]
    let ea = erfcx(a * FRAC_1_SQRT_2);
    if b.is_infinite() {
        return (0.5 * ea).ln() - 0.5 * a * a;
    }
    let eb = erfcx(b * FRAC_1_SQRT_2);
    let gap = 0.5 * (b - a) * (b + a);
    let bracket = (ea - eb) - eb * (-gap).exp_m1();
    bracket.ln() - LN_2 - 0.5 * a * a
}

/// Upper standard normal quantile: the `t` with Q(t) = `p`.
pub fn normal_upper_quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    if p > 0.5 {
        return -normal_upper_quantile(1.0 - p);
    }
    let target = p.ln();
    let (mut lo, mut hi) = (0.0_f64, 40.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if log_normal_sf(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * hi.max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// ln(eᵃ + eᵇ)
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// ln Σ exp(xᵢ); returns −∞ for an empty input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    if max == f64::INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// ln(1 + eˣ)
pub fn log1p_exp(x: f64) -> f64 {
    if x > 35.0 {
        x + (-x).exp()
    } else {
        x.exp().ln_1p()
    }
}

/// ln(eˣ − 1) for x > 0.
pub fn log_expm1(x: f64) -> f64 {
    if x > 35.0 {
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().ln()
    }
}

/// ln C(n, k) for nonnegative integers, by summing logs. Exact enough for n ≤ 10⁴.
pub fn log_binomial(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    (0..k)
        .map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln())
        .sum()
}
