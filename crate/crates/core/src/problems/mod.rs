//! Empirical-risk problems with per-sample gradient oracles.

mod bounds;
mod dataset;
mod example31;
mod least_squares;
mod logistic;
mod mlp;
mod tail;

pub use bounds::{thm31_bound, thm32_metric_and_bound, Thm31Params, Thm32Params};
pub use dataset::{Dataset, SnapshotHeader};
pub use example31::{example_31, expected_clipped_gradient_exact, Example31, EXAMPLE31_SAMPLES};
pub use least_squares::{make_least_squares, LeastSquares};
pub use logistic::{make_logistic, Logistic};
pub use mlp::{make_mlp, Mlp};
pub use tail::{
    estimate_kappa, estimate_kappa_with, fit_tail_constant, recommend_clip_threshold, GradStats,
};

use crate::clipping::clip_l2_in_place;
use crate::scalar::Scalar;

/// Smoothness and optimum information a problem may carry.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProblemMeta<T> {
    pub beta: Option<f64>,
    pub lipschitz: Option<f64>,
    pub optimum: Option<Vec<T>>,
}

/// F(w) = (1/n)·Σ f_i(w).
pub trait Problem<T: Scalar>: Send + Sync {
    fn name(&self) -> &'static str;
    fn n(&self) -> usize;
    fn dim(&self) -> usize;
    fn sample_loss(&self, w: &[T], i: usize) -> T;
    /// Writes ∇f_i(w) into `out`.
    fn sample_grad(&self, w: &[T], i: usize, out: &mut [T]);
    fn meta(&self) -> &ProblemMeta<T>;

    fn per_sample_grad(&self, w: &[T], i: usize) -> Vec<T> {
        let mut g = vec![T::zero(); self.dim()];
        self.sample_grad(w, i, &mut g);
        g
    }

    fn loss(&self, w: &[T]) -> T {
        let total: T = (0..self.n()).map(|i| self.sample_loss(w, i)).sum();
        total / T::of(self.n() as f64)
    }

    fn full_grad(&self, w: &[T], out: &mut [T]) {
        out.iter_mut().for_each(|x| *x = T::zero());
        let mut g = vec![T::zero(); self.dim()];
        for i in 0..self.n() {
            self.sample_grad(w, i, &mut g);
            for (o, &v) in out.iter_mut().zip(&g) {
                *o = *o + v;
            }
        }
        let inv = T::one() / T::of(self.n() as f64);
        out.iter_mut().for_each(|x| *x = *x * inv);
    }

    /// Starting point for training runs.
    fn initial_point(&self) -> Vec<T> {
        vec![T::zero(); self.dim()]
    }

    fn optimal_loss(&self) -> Option<T> {
        self.meta().optimum.as_ref().map(|w| self.loss(w))
    }
}

/// (1/n)·Σ clip_l2(∇f_i(w), c), enumerated over every sample.
pub fn expected_clipped_gradient<T: Scalar, P: Problem<T> + ?Sized>(
    problem: &P,
    w: &[T],
    c: T,
) -> Vec<T> {
    let mut acc = vec![T::zero(); problem.dim()];
    let mut g = vec![T::zero(); problem.dim()];
    for i in 0..problem.n() {
        problem.sample_grad(w, i, &mut g);
        clip_l2_in_place(&mut g, c);
        for (a, &v) in acc.iter_mut().zip(&g) {
            *a = *a + v;
        }
    }
    let inv = T::one() / T::of(problem.n() as f64);
    acc.iter_mut().for_each(|x| *x = *x * inv);
    acc
}

/// Largest relative disagreement between `sample_grad` and central differences
/// of `sample_loss` with step `h`, over every coordinate of the given probes.
///
/// Each coordinate's error is scaled by max(‖∇f_i‖∞, 1e-3).
pub fn finite_difference_error<P: Problem<f64> + ?Sized>(
    problem: &P,
    probes: &[(Vec<f64>, usize)],
    h: f64,
) -> f64 {
    let mut worst: f64 = 0.0;
    for (w, i) in probes {
        let g = problem.per_sample_grad(w, *i);
        let scale = crate::scalar::norm_inf(&g).max(1e-3);
        let mut probe = w.clone();
        for j in 0..w.len() {
            probe[j] = w[j] + h;
            let up = problem.sample_loss(&probe, *i);
            probe[j] = w[j] - h;
            let down = problem.sample_loss(&probe, *i);
            probe[j] = w[j];
            let fd = (up - down) / (2.0 * h);
            worst = worst.max((fd - g[j]).abs() / scale);
        }
    }
    worst
}
