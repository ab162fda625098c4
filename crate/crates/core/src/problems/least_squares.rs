use rand_distr::{Distribution, StandardNormal};

use super::dataset::{seeded, Dataset};
use super::{Problem, ProblemMeta};
use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar};

/// f_i(w) = ½(⟨w, x_i⟩ − y_i)².
#[derive(Debug, Clone)]
pub struct LeastSquares<T> {
    data: Dataset<T>,
    meta: ProblemMeta<T>,
}

impl<T: Scalar> LeastSquares<T> {
    /// Solves the normal equations for the optimum and takes β = λ_max(XᵀX/n).
    pub fn from_data(data: Dataset<T>) -> Result<Self> {
        let x = data.design();
        let y = nalgebra::DVector::from_iterator(data.n, data.y.iter().map(|v| v.to_f64_lossy()));
        let gram = x.transpose() * &x;
        let rhs = x.transpose() * y;
        let optimum = gram
            .clone()
            .cholesky()
            .map(|c| c.solve(&rhs))
            .ok_or_else(|| Error::contract("least squares design is rank deficient"))?;
        let beta = (gram / data.n as f64).symmetric_eigen().eigenvalues.max();
        Ok(Self {
            meta: ProblemMeta {
                beta: Some(beta),
                lipschitz: None,
                optimum: Some(optimum.iter().map(|&v| T::of(v)).collect()),
            },
            data,
        })
    }

    pub fn data(&self) -> &Dataset<T> {
        &self.data
    }

    fn residual(&self, w: &[T], i: usize) -> T {
        dot(w, self.data.row(i)) - self.data.y[i]
    }
}

/// Standard normal features, planted w_true ~ N(0, I), labels ⟨w_true, x⟩ + 0.1·N(0,1).
pub fn make_least_squares<T: Scalar>(n: usize, d: usize, seed: u64) -> Result<LeastSquares<T>> {
    if n == 0 || d == 0 {
        return Err(Error::contract("least squares needs n, d >= 1"));
    }
    let mut rng = seeded(seed, 0);
    let x = Dataset::<T>::gaussian_features(n, d, &mut rng);
    let w_true: Vec<T> = (0..d)
        .map(|_| T::of(StandardNormal.sample(&mut rng)))
        .collect();
    let y = (0..n)
        .map(|i| {
            let noise: f64 = StandardNormal.sample(&mut rng);
            dot(&w_true, &x[i * d..(i + 1) * d]) + T::of(0.1 * noise)
        })
        .collect();
    LeastSquares::from_data(Dataset::new(n, d, x, y)?)
}

impl<T: Scalar> Problem<T> for LeastSquares<T> {
    fn name(&self) -> &'static str {
        "least-squares"
    }
    fn n(&self) -> usize {
        self.data.n
    }
    fn dim(&self) -> usize {
        self.data.d
    }
    fn meta(&self) -> &ProblemMeta<T> {
        &self.meta
    }

    fn sample_loss(&self, w: &[T], i: usize) -> T {
        let r = self.residual(w, i);
        T::of(0.5) * r * r
    }

    fn sample_grad(&self, w: &[T], i: usize, out: &mut [T]) {
        let r = self.residual(w, i);
        for (o, &x) in out.iter_mut().zip(self.data.row(i)) {
            *o = r * x;
        }
    }

    /// Xᵀ(Xw − y)/n.
    fn full_grad(&self, w: &[T], out: &mut [T]) {
        let residuals: Vec<T> = (0..self.data.n).map(|i| self.residual(w, i)).collect();
        let inv = T::one() / T::of(self.data.n as f64);
        for (j, o) in out.iter_mut().enumerate() {
            let s: T = residuals
                .iter()
                .enumerate()
                .map(|(i, &r)| r * self.data.x[i * self.data.d + j])
                .sum();
            *o = s * inv;
        }
    }
}
