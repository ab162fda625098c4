use rand_distr::{Distribution, StandardNormal};

use super::dataset::{seeded, Dataset};
use super::{Problem, ProblemMeta};
use crate::error::{Error, Result};
use crate::scalar::{dot, norm2, Scalar};

/// f_i(w) = ln(1 + exp(−y_i⟨w, x_i⟩)) with labels y_i ∈ {−1, +1}.
#[derive(Debug, Clone)]
pub struct Logistic<T> {
    data: Dataset<T>,
    meta: ProblemMeta<T>,
}

fn softplus<T: Scalar>(z: T) -> T {
    if z > T::zero() {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

impl<T: Scalar> Logistic<T> {
    /// β = λ_max(XᵀX/n)/4 and L = max_i ‖x_i‖.
    pub fn from_data(data: Dataset<T>) -> Result<Self> {
        if data.y.iter().any(|&y| y != T::one() && y != -T::one()) {
            return Err(Error::contract("logistic labels must be +1 or -1"));
        }
        let beta = data.second_moment_lambda_max() / 4.0;
        let lipschitz = (0..data.n)
            .map(|i| norm2(data.row(i)).to_f64_lossy())
            .fold(0.0, f64::max);
        Ok(Self {
            meta: ProblemMeta {
                beta: Some(beta),
                lipschitz: Some(lipschitz),
                optimum: None,
            },
            data,
        })
    }

    pub fn data(&self) -> &Dataset<T> {
        &self.data
    }
}

/// Standard normal features, labels sign(⟨w_true, x⟩ + 0.5·N(0,1)).
pub fn make_logistic<T: Scalar>(n: usize, d: usize, seed: u64) -> Result<Logistic<T>> {
    if n == 0 || d == 0 {
        return Err(Error::contract("logistic needs n, d >= 1"));
    }
    let mut rng = seeded(seed, 1);
    let x = Dataset::<T>::gaussian_features(n, d, &mut rng);
    let w_true: Vec<T> = (0..d)
        .map(|_| T::of(StandardNormal.sample(&mut rng)))
        .collect();
    let y = (0..n)
        .map(|i| {
            let noise: f64 = StandardNormal.sample(&mut rng);
            let margin = dot(&w_true, &x[i * d..(i + 1) * d]) + T::of(0.5 * noise);
            if margin >= T::zero() {
                T::one()
            } else {
                -T::one()
            }
        })
        .collect();
    Logistic::from_data(Dataset::new(n, d, x, y)?)
}

impl<T: Scalar> Problem<T> for Logistic<T> {
    fn name(&self) -> &'static str {
        "logistic"
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
        softplus(-self.data.y[i] * dot(w, self.data.row(i)))
    }

    fn sample_grad(&self, w: &[T], i: usize, out: &mut [T]) {
        let y = self.data.y[i];
        let scale = -y * sigmoid(-y * dot(w, self.data.row(i)));
        for (o, &x) in out.iter_mut().zip(self.data.row(i)) {
            *o = scale * x;
        }
    }
}
