use num_rational::Ratio;

use super::{Problem, ProblemMeta};
use crate::scalar::Scalar;

pub const EXAMPLE31_SAMPLES: [i64; 3] = [-20, -10, 90];

/// f_i(w) = (w − x_i)²/2 on the three points −20, −10, 90; w* = 20.
#[derive(Debug, Clone)]
pub struct Example31<T> {
    xs: [T; 3],
    meta: ProblemMeta<T>,
}

pub fn example_31<T: Scalar>() -> Example31<T> {
    Example31 {
        xs: EXAMPLE31_SAMPLES.map(|x| T::of(x as f64)),
        meta: ProblemMeta {
            beta: Some(1.0),
            lipschitz: None,
            optimum: Some(vec![T::of(20.0)]),
        },
    }
}

impl<T: Scalar> Problem<T> for Example31<T> {
    fn name(&self) -> &'static str {
        "example31"
    }
    fn n(&self) -> usize {
        3
    }
    fn dim(&self) -> usize {
        1
    }
    fn meta(&self) -> &ProblemMeta<T> {
        &self.meta
    }

    fn sample_loss(&self, w: &[T], i: usize) -> T {
        let r = w[0] - self.xs[i];
        T::of(0.5) * r * r
    }

    fn sample_grad(&self, w: &[T], i: usize, out: &mut [T]) {
        out[0] = w[0] - self.xs[i];
    }
}

/// Mean clipped gradient of Example 3.1 in exact rational arithmetic.
pub fn expected_clipped_gradient_exact(w: Ratio<i64>, c: Ratio<i64>) -> Ratio<i64> {
    let total = EXAMPLE31_SAMPLES
        .iter()
        .map(|&x| (w - Ratio::from_integer(x)).clamp(-c, c))
        .fold(Ratio::from_integer(0), |a, b| a + b);
    total / Ratio::from_integer(3)
}
