use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::config::{Aggregation, AlphaMode, MixConfig};
use crate::clipping::clip_l2_linf_in_place;
use crate::error::{Error, Result};
use crate::problems::Problem;
use crate::scalar::{norm2, Scalar};

/// The two most recent iterates and the position in the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerState<T> {
    /// w_{k−1}
    pub w_curr: Vec<T>,
    /// w_{k−2}
    pub w_prev: Vec<T>,
    pub k: u64,
    pub seed: u64,
}

impl<T: Scalar> TrainerState<T> {
    pub fn new(w_curr: Vec<T>, w_prev: Vec<T>, seed: u64) -> Result<Self> {
        if w_curr.len() != w_prev.len() {
            return Err(Error::contract(
                "w_curr and w_prev must have equal dimension",
            ));
        }
        Ok(Self {
            w_curr,
            w_prev,
            k: 0,
            seed,
        })
    }

    /// Both iterates at `w`.
    pub fn at(w: Vec<T>, seed: u64) -> Self {
        Self {
            w_prev: w.clone(),
            w_curr: w,
            k: 0,
            seed,
        }
    }

    pub fn dim(&self) -> usize {
        self.w_curr.len()
    }
}

/// What one step did, for logging.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub batch_size: usize,
    /// ‖G‖ of the aggregated clipped gradient.
    pub grad_norm: f64,
    /// min_j |w_curr(j) − w_prev(j)| after separation.
    pub min_coord_gap: f64,
}

/// Generators for sub-step `k` of a seeded run: subsampling, mixing weights and noise.
pub struct StepStreams {
    pub sampling: ChaCha8Rng,
    pub alpha: ChaCha8Rng,
    pub noise: ChaCha8Rng,
}

impl StepStreams {
    pub fn new(seed: u64, k: u64) -> Self {
        let stream = |id: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(3 * k + id);
            rng
        };
        Self {
            sampling: stream(0),
            alpha: stream(1),
            noise: stream(2),
        }
    }
}

/// Includes each of `0..n` independently with probability `q`.
pub fn poisson_sample<R: Rng + ?Sized>(n: usize, q: f64, rng: &mut R) -> Vec<usize> {
    if q <= 0.0 {
        return Vec::new();
    }
    if q >= 1.0 {
        return (0..n).collect();
    }
    (0..n).filter(|_| rng.random::<f64>() < q).collect()
}

fn check_dim<T: Scalar, P: Problem<T> + ?Sized>(
    state: &TrainerState<T>,
    problem: &P,
) -> Result<()> {
    if state.w_curr.len() != problem.dim() || state.w_prev.len() != problem.dim() {
        return Err(Error::contract(format!(
            "state dimension {} does not match problem dimension {}",
            state.w_curr.len(),
            problem.dim()
        )));
    }
    Ok(())
}

/// Aggregated clipped gradient over `batch` at `w`, summed in index order.
pub fn clipped_gradient<T: Scalar, P: Problem<T> + ?Sized>(
    problem: &P,
    w: &[T],
    batch: &[usize],
    cfg: &MixConfig<T>,
) -> Vec<T> {
    let mut total = vec![T::zero(); w.len()];
    let mut g = vec![T::zero(); w.len()];
    for &i in batch {
        problem.sample_grad(w, i, &mut g);
        clip_l2_linf_in_place(&mut g, &cfg.clip);
        for (t, &v) in total.iter_mut().zip(&g) {
            *t = *t + v;
        }
    }
    if cfg.aggregation == Aggregation::Mean {
        let expected = problem.n() as f64 * cfg.q;
        if expected > 0.0 {
            let inv = T::one() / T::of(expected);
            total.iter_mut().for_each(|t| *t = *t * inv);
        }
    }
    total
}

fn noise_vector<T: Scalar>(d: usize, sigma: T, rng: &mut ChaCha8Rng) -> Vec<T> {
    (0..d)
        .map(|_| sigma * T::of(rng.sample(StandardNormal)))
        .collect()
}

fn min_gap<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y).abs().to_f64_lossy())
        .fold(f64::INFINITY, f64::min)
}

/// Pushes each coordinate pair closer than τ apart to distance |gap| + τ,
/// moving both by τ/2 along sign(a − b) with sign(0) = +1.
pub fn enforce_separation<T: Scalar>(a: &mut [T], b: &mut [T], tau: T) {
    if tau == T::zero() {
        return;
    }
    let half = tau / T::of(2.0);
    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
        let diff = *x - *y;
        if diff.abs() < tau {
            let s = if diff >= T::zero() {
                T::one()
            } else {
                -T::one()
            };
            *x = *x + s * half;
            *y = *y - s * half;
        }
    }
}

/// One ModelMix iteration: subsample and clip, separate, mix, then take the
/// noisy gradient step from the mixed point.
pub fn modelmix_step<T: Scalar, P: Problem<T> + ?Sized>(
    state: &TrainerState<T>,
    problem: &P,
    cfg: &MixConfig<T>,
) -> Result<(TrainerState<T>, StepInfo)> {
    check_dim(state, problem)?;
    let mut streams = StepStreams::new(state.seed, state.k);
    let batch = poisson_sample(problem.n(), cfg.q, &mut streams.sampling);
    let g = clipped_gradient(problem, &state.w_curr, &batch, cfg);

    let mut a = state.w_curr.clone();
    let mut b = state.w_prev.clone();
    enforce_separation(
        &mut a,
        &mut b,
        T::of(cfg.tau.tau_at(state.k, cfg.iterations)),
    );

    let d = a.len();
    let alphas: Vec<T> = match cfg.alpha {
        AlphaMode::Uniform => (0..d)
            .map(|_| T::of(streams.alpha.random::<f64>()))
            .collect(),
        AlphaMode::Fixed(v) => vec![T::of(v); d],
    };
    let noise = noise_vector(d, cfg.sigma, &mut streams.noise);
    let next: Vec<T> = (0..d)
        .map(|j| alphas[j] * a[j] + (T::one() - alphas[j]) * b[j] - cfg.eta * (g[j] + noise[j]))
        .collect();
    let info = StepInfo {
        batch_size: batch.len(),
        grad_norm: norm2(&g).to_f64_lossy(),
        min_coord_gap: min_gap(&a, &b),
    };
    Ok((
        TrainerState {
            w_curr: next,
            w_prev: a,
            k: state.k + 1,
            seed: state.seed,
        },
        info,
    ))
}

/// Clipped DP-SGD: w ← w − η(G + Δ). Uses the same streams as [`modelmix_step`].
pub fn dpsgd_step<T: Scalar, P: Problem<T> + ?Sized>(
    state: &TrainerState<T>,
    problem: &P,
    cfg: &MixConfig<T>,
) -> Result<(TrainerState<T>, StepInfo)> {
    check_dim(state, problem)?;
    let mut streams = StepStreams::new(state.seed, state.k);
    let batch = poisson_sample(problem.n(), cfg.q, &mut streams.sampling);
    let g = clipped_gradient(problem, &state.w_curr, &batch, cfg);
    let noise = noise_vector(g.len(), cfg.sigma, &mut streams.noise);
    let a = &state.w_curr;
    let next: Vec<T> = (0..a.len())
        .map(|j| a[j] - cfg.eta * (g[j] + noise[j]))
        .collect();
    let info = StepInfo {
        batch_size: batch.len(),
        grad_norm: norm2(&g).to_f64_lossy(),
        min_coord_gap: min_gap(&state.w_curr, &state.w_prev),
    };
    Ok((
        TrainerState {
            w_curr: next,
            w_prev: state.w_curr.clone(),
            k: state.k + 1,
            seed: state.seed,
        },
        info,
    ))
}

/// Unclipped, noiseless minibatch SGD with summed gradients: w ← w − η·Σ∇f_i.
pub fn sgd_step<T: Scalar, P: Problem<T> + ?Sized>(
    state: &TrainerState<T>,
    problem: &P,
    eta: T,
    q: f64,
) -> Result<(TrainerState<T>, StepInfo)> {
    check_dim(state, problem)?;
    let mut streams = StepStreams::new(state.seed, state.k);
    let batch = poisson_sample(problem.n(), q, &mut streams.sampling);
    let d = state.dim();
    let mut total = vec![T::zero(); d];
    let mut g = vec![T::zero(); d];
    for &i in &batch {
        problem.sample_grad(&state.w_curr, i, &mut g);
        for (t, &v) in total.iter_mut().zip(&g) {
            *t = *t + v;
        }
    }
    let next: Vec<T> = state
        .w_curr
        .iter()
        .zip(&total)
        .map(|(&w, &g)| w - eta * g)
        .collect();
    let info = StepInfo {
        batch_size: batch.len(),
        grad_norm: norm2(&total).to_f64_lossy(),
        min_coord_gap: min_gap(&state.w_curr, &state.w_prev),
    };
    Ok((
        TrainerState {
            w_curr: next,
            w_prev: state.w_curr.clone(),
            k: state.k + 1,
            seed: state.seed,
        },
        info,
    ))
}

/// α∘first + (1−α)∘second − η(G(grad_at) + Δ) with the streams of sub-step `sub`.
fn mixed_update<T: Scalar, P: Problem<T> + ?Sized>(
    problem: &P,
    cfg: &MixConfig<T>,
    seed: u64,
    sub: u64,
    grad_at: &[T],
    first: &[T],
    second: &[T],
) -> Vec<T> {
    let mut streams = StepStreams::new(seed, sub);
    let batch = poisson_sample(problem.n(), cfg.q, &mut streams.sampling);
    let g = clipped_gradient(problem, grad_at, &batch, cfg);
    let d = first.len();
    let alphas: Vec<T> = match cfg.alpha {
        AlphaMode::Uniform => (0..d)
            .map(|_| T::of(streams.alpha.random::<f64>()))
            .collect(),
        AlphaMode::Fixed(v) => vec![T::of(v); d],
    };
    let noise = noise_vector(d, cfg.sigma, &mut streams.noise);
    (0..d)
        .map(|j| {
            alphas[j] * first[j] + (T::one() - alphas[j]) * second[j] - cfg.eta * (g[j] + noise[j])
        })
        .collect()
}

/// Two-model variant: model 1 mixes with model 2 and steps on its own
/// gradient; model 2 then mixes the updated model 1 with itself and steps.
///
/// Sub-steps use streams 2k+1 and 2k+2 of `a.seed`, with k = `a.k`.
pub fn strawman_alternating_step<T: Scalar, P: Problem<T> + ?Sized>(
    a: &TrainerState<T>,
    b: &TrainerState<T>,
    problem: &P,
    cfg: &MixConfig<T>,
) -> Result<(TrainerState<T>, TrainerState<T>)> {
    check_dim(a, problem)?;
    check_dim(b, problem)?;
    let w1 = mixed_update(
        problem,
        cfg,
        a.seed,
        2 * a.k + 1,
        &a.w_curr,
        &a.w_curr,
        &b.w_curr,
    );
    let w2 = mixed_update(problem, cfg, a.seed, 2 * a.k + 2, &b.w_curr, &w1, &b.w_curr);
    let advance = |s: &TrainerState<T>, w: Vec<T>| TrainerState {
        w_prev: s.w_curr.clone(),
        w_curr: w,
        k: s.k + 1,
        seed: s.seed,
    };
    Ok((advance(a, w1), advance(b, w2)))
}
