use rand_distr::{Distribution, StandardNormal};

use super::dataset::{seeded, Dataset};
use super::{Problem, ProblemMeta};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Fully connected tanh network with a scalar linear output and squared loss
/// f_i(w) = ½(net(w, x_i) − y_i)².
///
/// Parameters are laid out layer by layer, each as a row-major weight matrix
/// (out × in) followed by its bias vector.
#[derive(Debug, Clone)]
pub struct Mlp<T> {
    widths: Vec<usize>,
    data: Dataset<T>,
    init: Vec<T>,
    meta: ProblemMeta<T>,
}

fn param_count(widths: &[usize]) -> usize {
    widths.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

fn scaled_normals<T: Scalar>(widths: &[usize], rng: &mut rand_chacha::ChaCha8Rng) -> Vec<T> {
    let mut params = Vec::with_capacity(param_count(widths));
    for w in widths.windows(2) {
        let std = 1.0 / (w[0] as f64).sqrt();
        for _ in 0..w[1] * w[0] {
            let z: f64 = StandardNormal.sample(rng);
            params.push(T::of(std * z));
        }
        params.extend(std::iter::repeat_n(T::zero(), w[1]));
    }
    params
}

impl<T: Scalar> Mlp<T> {
    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn data(&self) -> &Dataset<T> {
        &self.data
    }

    /// Activations of every layer, input first; the last entry holds the output.
    fn forward(&self, w: &[T], x: &[T]) -> Vec<Vec<T>> {
        let layers = self.widths.len() - 1;
        let mut acts = Vec::with_capacity(layers + 1);
        acts.push(x.to_vec());
        let mut offset = 0;
        for (l, pair) in self.widths.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let weights = &w[offset..offset + fan_in * fan_out];
            let bias = &w[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            let prev = &acts[l];
            let next: Vec<T> = (0..fan_out)
                .map(|r| {
                    let z: T = weights[r * fan_in..(r + 1) * fan_in]
                        .iter()
                        .zip(prev)
                        .map(|(&a, &b)| a * b)
                        .sum::<T>()
                        + bias[r];
                    if l + 1 == layers {
                        z
                    } else {
                        z.tanh()
                    }
                })
                .collect();
            acts.push(next);
            offset += fan_in * fan_out + fan_out;
        }
        acts
    }
}

/// Teacher-student regression: labels come from a random network of the same
/// shape plus 0.1·N(0,1) noise. `widths` runs from input size to 1.
pub fn make_mlp<T: Scalar>(widths: &[usize], n: usize, seed: u64) -> Result<Mlp<T>> {
    if widths.len() < 2 || widths.contains(&0) || *widths.last().unwrap() != 1 || n == 0 {
        return Err(Error::contract(
            "mlp widths need at least two positive entries ending in 1",
        ));
    }
    let mut rng = seeded(seed, 2);
    let input = widths[0];
    let x = Dataset::<T>::gaussian_features(n, input, &mut rng);
    let teacher = Mlp {
        widths: widths.to_vec(),
        data: Dataset::new(1, input, vec![T::zero(); input], vec![T::zero()])?,
        init: Vec::new(),
        meta: ProblemMeta::default(),
    };
    let teacher_w: Vec<T> = scaled_normals(widths, &mut rng);
    let y = (0..n)
        .map(|i| {
            let out = teacher.forward(&teacher_w, &x[i * input..(i + 1) * input]);
            let noise: f64 = StandardNormal.sample(&mut rng);
            out.last().unwrap()[0] + T::of(0.1 * noise)
        })
        .collect();
    let init = scaled_normals(widths, &mut seeded(seed, 3));
    Ok(Mlp {
        widths: widths.to_vec(),
        data: Dataset::new(n, input, x, y)?,
        init,
        meta: ProblemMeta::default(),
    })
}

impl<T: Scalar> Problem<T> for Mlp<T> {
    fn name(&self) -> &'static str {
        "mlp"
    }
    fn n(&self) -> usize {
        self.data.n
    }
    fn dim(&self) -> usize {
        param_count(&self.widths)
    }
    fn meta(&self) -> &ProblemMeta<T> {
        &self.meta
    }
    fn initial_point(&self) -> Vec<T> {
        self.init.clone()
    }

    fn sample_loss(&self, w: &[T], i: usize) -> T {
        let acts = self.forward(w, self.data.row(i));
        let r = acts.last().unwrap()[0] - self.data.y[i];
        T::of(0.5) * r * r
    }

    fn sample_grad(&self, w: &[T], i: usize, out: &mut [T]) {
        let acts = self.forward(w, self.data.row(i));
        let layers = self.widths.len() - 1;
        // delta holds ∂f/∂z for the current layer
        let mut delta = vec![acts[layers][0] - self.data.y[i]];
        let mut offset = out.len();
        for l in (0..layers).rev() {
            let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
            offset -= fan_in * fan_out + fan_out;
            let prev = &acts[l];
            for r in 0..fan_out {
                for c in 0..fan_in {
                    out[offset + r * fan_in + c] = delta[r] * prev[c];
                }
                out[offset + fan_in * fan_out + r] = delta[r];
            }
            if l > 0 {
                let weights = &w[offset..offset + fan_in * fan_out];
                delta = (0..fan_in)
                    .map(|c| {
                        let back: T = (0..fan_out)
                            .map(|r| weights[r * fan_in + c] * delta[r])
                            .sum();
                        back * (T::one() - prev[c] * prev[c])
                    })
                    .collect();
            }
        }
    }
}
