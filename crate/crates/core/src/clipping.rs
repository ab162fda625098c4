//! Per-sample gradient clipping: l2 rescaling, optionally followed by
//! coordinate-wise saturation at c/√p.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{norm2, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipConfig<T> {
    /// l2 threshold.
    pub c: T,
    /// l∞ truncation parameter; the per-coordinate cap is c/√p.
    pub p: u32,
}

impl<T: Scalar> ClipConfig<T> {
    pub fn new(c: T, p: u32) -> Result<Self> {
        if !(c > T::zero()) || p == 0 {
            return Err(Error::contract("clipping needs c > 0 and p >= 1"));
        }
        Ok(Self { c, p })
    }

    /// Plain l2 clipping.
    pub fn l2(c: T) -> Self {
        Self { c, p: 1 }
    }

    pub fn coordinate_cap(&self) -> T {
        self.c / T::of(self.p as f64).sqrt()
    }
}

/// Scales `g` in place so that its computed l2 norm does not exceed `c`.
///
/// Vectors already inside the ball are left untouched, which makes the
/// operation an exact projection-style fixed point.
pub fn clip_l2_in_place<T: Scalar>(g: &mut [T], c: T) {
    let norm = norm2(g);
    if norm <= c || norm == T::zero() {
        return;
    }
    let original: Vec<T> = g.to_vec();
    let mut factor = c / norm;
    loop {
        for (x, &o) in g.iter_mut().zip(&original) {
            *x = o * factor;
        }
        if norm2(g) <= c {
            return;
        }
        // rounding pushed the norm just past c
        factor = factor * (T::one() - T::epsilon());
    }
}

pub fn clip_l2<T: Scalar>(g: &[T], c: T) -> Vec<T> {
    let mut out = g.to_vec();
    clip_l2_in_place(&mut out, c);
    out
}

/// l2 clipping to `cfg.c`, then saturation of each coordinate at ±c/√p.
pub fn clip_l2_linf_in_place<T: Scalar>(g: &mut [T], cfg: &ClipConfig<T>) {
    clip_l2_in_place(g, cfg.c);
    if cfg.p == 1 {
        return;
    }
    let cap = cfg.coordinate_cap();
    for x in g.iter_mut() {
        if x.abs() > cap {
            *x = cap.copysign(*x);
        }
    }
}

pub fn clip_l2_linf<T: Scalar>(g: &[T], cfg: &ClipConfig<T>) -> Vec<T> {
    let mut out = g.to_vec();
    clip_l2_linf_in_place(&mut out, cfg);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l2_examples() {
        assert_eq!(clip_l2(&[3.0_f64, 4.0], 10.0), vec![3.0, 4.0]);
        let c = clip_l2(&[3.0_f64, 4.0], 1.0);
        assert!((c[0] - 0.6).abs() < 1e-15 && (c[1] - 0.8).abs() < 1e-15);
        assert_eq!(clip_l2(&[0.0_f64, 0.0], 1.0), vec![0.0, 0.0]);
    }

    #[test]
    fn combined_examples() {
        let cfg = ClipConfig::new(5.0_f64, 4).unwrap();
        assert_eq!(clip_l2_linf(&[3.0, 4.0], &cfg), vec![2.5, 2.5]);
        let cfg = ClipConfig::new(5.0_f64, 1).unwrap();
        assert_eq!(clip_l2_linf(&[0.0, 7.0], &cfg), vec![0.0, 5.0]);
    }

    #[test]
    fn single_precision() {
        let c = clip_l2(&[3.0_f32, 4.0], 1.0);
        assert!(norm2(&c) <= 1.0);
        assert!((c[0] - 0.6).abs() < 1e-6);
    }

    #[test]
    fn invalid_config() {
        assert!(ClipConfig::new(0.0_f64, 1).is_err());
        assert!(ClipConfig::new(1.0_f64, 0).is_err());
    }
}
