//! Adaptive Gauss–Kronrod integration of positive integrands given in log form.
//!
//! Everything the accountant integrates is `exp(g(x))` for some log-integrand
//! `g` whose magnitude can reach ±10⁵ nats. The driver locates the peak of `g`,
//! trims the range to where `g` is within [`QuadratureOptions::drop_nats`] of
//! the peak, and integrates `exp(g − g_max)` with a global-error bisection
//! strategy on a 10/21-point Kronrod pair.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_600_525_490_964,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for the odd-indexed Kronrod nodes XGK[1], XGK[3], ...
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadratureOptions {
    /// Stop refining once the estimated error is below this fraction of the total.
    pub target_rel: f64,
    /// Report failure if the final estimate is worse than this.
    pub fail_rel: f64,
    pub max_intervals: usize,
    /// Range trimming threshold below the peak, in nats.
    pub drop_nats: f64,
    /// Absolute rounding uncertainty of the log-integrand itself, in nats.
    /// Both tolerances are widened to what such an integrand can support.
    pub noise_nats: f64,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            target_rel: 1e-13,
            fail_rel: 1e-10,
            max_intervals: 4000,
            drop_nats: 64.0,
            noise_nats: 0.0,
        }
    }
}

/// Result of [`integrate_log`]: `ln ∫ exp(g)` and its estimated relative error.
#[derive(Debug, Clone, Copy)]
pub struct LogIntegral {
    pub log_value: f64,
    pub rel_error: f64,
    pub intervals: usize,
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// One Kronrod panel: (K21 estimate, |K21 − G10|).
fn kronrod21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = fc * WGK[10];
    let mut gauss = 0.0;
    for (j, &x) in XGK.iter().enumerate().take(10) {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kron += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kron * half, ((kron - gauss) * half).abs())
}

/// Plain adaptive integration of `f` over `[a, b]` split at `breaks`.
///
/// Returns (value, absolute error estimate, panel count).
pub fn integrate<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    breaks: &[f64],
    opts: &QuadratureOptions,
) -> (f64, f64, usize) {
    let mut cuts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|x| x.is_finite() && *x > a && *x < b)
        .collect();
    cuts.push(a);
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut heap = BinaryHeap::new();
    let (mut total, mut err) = (0.0, 0.0);
    for w in cuts.windows(2) {
        let (value, error) = kronrod21(f, w[0], w[1]);
        total += value;
        err += error;
        heap.push(Panel {
            a: w[0],
            b: w[1],
            value,
            error,
        });
    }

    while err > opts.target_rel * total.abs() && heap.len() < opts.max_intervals {
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            break;
        }
        let (v1, e1) = kronrod21(f, worst.a, mid);
        let (v2, e2) = kronrod21(f, mid, worst.b);
        total += v1 + v2 - worst.value;
        err += e1 + e2 - worst.error;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }
    // re-sum to shed accumulated update rounding
    let total: f64 = heap.iter().map(|p| p.value).sum();
    let err: f64 = heap.iter().map(|p| p.error).sum();
    (total, err, heap.len())
}

/// ln ∫ exp(g(x)) dx over the real line.
///
/// `hints` are locations of possible modes or kinks (they become breakpoints);
/// `scale` is the narrowest length scale of `g` and sets the search step.
pub fn integrate_log<G: Fn(f64) -> f64>(
    g: &G,
    hints: &[f64],
    scale: f64,
    opts: &QuadratureOptions,
) -> Result<LogIntegral> {
    if hints.is_empty() || !(scale > 0.0) {
        return Err(Error::contract(
            "integrate_log needs at least one hint and a positive scale",
        ));
    }
    if opts.noise_nats > 1.0 {
        return Err(Error::Numerical {
            what: format!(
                "log-integrand carries {:.3e} nats of rounding noise, beyond what quadrature can resolve",
                opts.noise_nats
            ),
            achieved: f64::INFINITY,
        });
    }
    let (peak, g_max) = locate_peak(g, hints, scale);
    if !g_max.is_finite() {
        return Err(Error::Numerical {
            what: format!("log-integrand has no finite maximum (found {g_max})"),
            achieved: f64::INFINITY,
        });
    }
    let floor = g_max - opts.drop_nats;
    let lo = walk_out(g, peak, -scale, floor);
    let hi = walk_out(g, peak, scale, floor);

    let mut breaks: Vec<f64> = hints.to_vec();
    breaks.push(peak);
    breaks.push(peak - 4.0 * scale);
    breaks.push(peak + 4.0 * scale);

    let h = |x: f64| (g(x) - g_max).exp();
    let inner = QuadratureOptions {
        target_rel: opts.target_rel.max(4.0 * opts.noise_nats),
        ..*opts
    };
    let (total, err, intervals) = integrate(&h, lo, hi, &breaks, &inner);
    let rel_error = if total > 0.0 {
        err / total
    } else {
        f64::INFINITY
    };
    if !(rel_error <= opts.fail_rel.max(64.0 * opts.noise_nats)) {
        return Err(Error::Numerical {
            what: "adaptive quadrature did not converge".into(),
            achieved: if rel_error.is_nan() {
                f64::INFINITY
            } else {
                rel_error
            },
        });
    }
    Ok(LogIntegral {
        log_value: total.ln() + g_max,
        rel_error,
        intervals,
    })
}

fn locate_peak<G: Fn(f64) -> f64>(g: &G, hints: &[f64], scale: f64) -> (f64, f64) {
    let mut best = (hints[0], f64::NEG_INFINITY);
    let mut consider = |x: f64| {
        let v = g(x);
        if v > best.1 {
            best = (x, v);
        }
    };
    let lo = hints.iter().copied().fold(f64::INFINITY, f64::min) - 40.0 * scale;
    let hi = hints.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 40.0 * scale;
    let coarse = 2000;
    for i in 0..=coarse {
        consider(lo + (hi - lo) * i as f64 / coarse as f64);
    }
    for &h in hints {
        for j in -80..=80 {
            consider(h + 0.25 * scale * j as f64);
        }
    }
    // golden-section polish around the best grid point
    let step = (0.25 * scale).min((hi - lo) / coarse as f64);
    let (mut a, mut b) = (best.0 - step, best.0 + step);
    let phi = 0.5 * (5.0_f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..60 {
        if gc > gd {
            b = d;
            d = c;
            gd = gc;
            c = b - phi * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + phi * (b - a);
            gd = g(d);
        }
    }
    let x = 0.5 * (a + b);
    let v = g(x);
    if v > best.1 {
        (x, v)
    } else {
        best
    }
}

fn walk_out<G: Fn(f64) -> f64>(g: &G, start: f64, step0: f64, floor: f64) -> f64 {
    let mut x = start;
    let mut step = step0;
    for _ in 0..400 {
        x += step;
        if !(g(x) > floor) {
            return x;
        }
        step *= 1.25;
    }
    x
}
