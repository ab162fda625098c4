//! Noiseless convergence sweep on a convex problem, checked against the
//! explicit convex bound, plus a seeded head-to-head of the four optimizers.

use serde::{Deserialize, Serialize};

use super::problem::ProblemKind;
use crate::clipping::ClipConfig;
use crate::error::{Error, Result};
use crate::optimizer::{
    train, Aggregation, AlphaMode, Method, MixConfig, OutputMode, TauSchedule, TrainOptions,
    TrainerState,
};
use crate::problems::{thm31_bound, thm32_metric_and_bound, Problem, Thm31Params, Thm32Params};
use crate::scalar::norm2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceSpec {
    pub problem: ProblemKind,
    pub n: usize,
    pub d: usize,
    /// Hidden width, used by the MLP only.
    pub hidden: usize,
    pub q: f64,
    /// η = γ/(nq√T).
    pub gamma: f64,
    /// τ = tau_over_eta · η.
    pub tau_over_eta: f64,
    pub clip: f64,
    pub horizons: Vec<u64>,
    /// Independent runs averaged per horizon.
    pub repeats: u64,
    /// Noise level of the head-to-head comparison.
    pub head_to_head_sigma: f64,
    /// Clipping norm of the head-to-head comparison.
    pub head_to_head_clip: f64,
    /// Horizon of the head-to-head comparison.
    pub head_to_head_steps: u64,
    /// Step-size multiple of the baseline η₀ used in the head-to-head comparison.
    pub head_to_head_eta_factor: f64,
    /// Noise-mechanism constant of the non-convex bound.
    pub v: f64,
    pub delta: f64,
}

impl Default for ConvergenceSpec {
    fn default() -> Self {
        Self {
            problem: ProblemKind::LeastSquares,
            n: 1000,
            d: 20,
            hidden: 16,
            q: 0.1,
            gamma: 1.0,
            tau_over_eta: 0.05,
            clip: 1e6,
            horizons: vec![100, 1000, 10_000],
            repeats: 3,
            head_to_head_sigma: 1.0,
            head_to_head_clip: 5.0,
            head_to_head_steps: 1000,
            head_to_head_eta_factor: 2.0,
            v: 1.0,
            delta: 1e-5,
        }
    }
}

impl ConvergenceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 || self.repeats == 0 || self.horizons.is_empty() {
            return Err(Error::contract(
                "convergence spec: n, d, repeats and horizons must be nonempty",
            ));
        }
        if !(self.q > 0.0 && self.q <= 1.0)
            || !(self.gamma > 0.0)
            || !(self.clip > 0.0 && self.head_to_head_clip > 0.0)
        {
            return Err(Error::contract(
                "convergence spec: need q in (0,1], gamma > 0 and positive clipping norms",
            ));
        }
        if self.tau_over_eta < 0.0
            || self.head_to_head_sigma < 0.0
            || !(self.head_to_head_eta_factor > 0.0)
        {
            return Err(Error::contract(
                "convergence spec: tau, sigma and eta factor must be nonnegative",
            ));
        }
        if self.horizons.contains(&0) || self.head_to_head_steps == 0 {
            return Err(Error::contract(
                "convergence spec: horizons must be positive",
            ));
        }
        if self.problem == ProblemKind::Example31 {
            return Err(Error::contract(
                "convergence spec: example31 has its own driver",
            ));
        }
        Ok(())
    }

    /// η = γ/(nq√T).
    pub fn eta(&self, steps: u64) -> f64 {
        self.gamma / (self.n as f64 * self.q * (steps as f64).sqrt())
    }

    fn mix_config(&self, eta: f64, clip: f64, sigma: f64, steps: u64, seed: u64) -> MixConfig<f64> {
        MixConfig {
            eta,
            clip: ClipConfig::l2(clip),
            tau: TauSchedule::Constant(self.tau_over_eta * eta),
            q: self.q,
            sigma,
            iterations: steps,
            seed,
            aggregation: Aggregation::Sum,
            alpha: AlphaMode::Uniform,
        }
    }
}

/// Gap and bound at one horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonResult {
    #[serde(rename = "T")]
    pub steps: u64,
    pub eta: f64,
    /// Mean of F(w̄) − F(w*) over the repeats.
    pub gap: f64,
    pub gaps: Vec<f64>,
    /// Largest bound over the repeats, each evaluated with that run's measured constants.
    pub bound: Option<f64>,
    pub w0_measured: f64,
    pub lipschitz_measured: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: Method,
    pub final_loss: f64,
    pub final_grad_norm: f64,
    /// Non-convex trajectory metric over logged full-batch gradient norms.
    pub thm32_metric: f64,
    pub trajectory_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub horizons: Vec<HorizonResult>,
    /// Least-squares slope of ln gap against ln T.
    pub slope: Option<f64>,
    pub bound_holds: Option<bool>,
    pub head_to_head: Vec<MethodResult>,
    /// Explicit non-convex bound at the head-to-head configuration, when a privacy level is finite.
    pub thm32_bound: Option<f64>,
}

/// Slope of the least-squares line through (ln x, ln y).
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 || ys.iter().any(|y| !(*y > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn max_sample_grad_norm(problem: &dyn Problem<f64>, w: &[f64], g: &mut [f64]) -> f64 {
    (0..problem.n())
        .map(|i| {
            problem.sample_grad(w, i, g);
            norm2(g)
        })
        .fold(0.0, f64::max)
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn horizon(
    spec: &ConvergenceSpec,
    problem: &dyn Problem<f64>,
    steps: u64,
    seed: u64,
) -> Result<HorizonResult> {
    let eta = spec.eta(steps);
    let optimum = problem.meta().optimum.clone();
    let f_star = problem.optimal_loss();
    let start = problem.initial_point();
    let opts = TrainOptions {
        output: OutputMode::FullTrajectory,
        log_every: 0,
    };
    let mut gaps = Vec::new();
    let mut bound: Option<f64> = None;
    let (mut w0_max, mut l_max) = (0.0_f64, 0.0_f64);
    let mut g = vec![0.0; problem.dim()];
    for r in 0..spec.repeats {
        let cfg = spec.mix_config(eta, spec.clip, 0.0, steps, seed.wrapping_add(r));
        let out = train(
            problem,
            TrainerState::at(start.clone(), cfg.seed),
            &cfg,
            Method::Modelmix,
            &opts,
        )?;
        let f_star = f_star.ok_or_else(|| {
            Error::contract("convergence sweep needs a problem with a known optimum")
        })?;
        gaps.push(problem.loss(&out.w_bar) - f_star);

        let trajectory = out.trajectory.expect("full trajectory requested");
        let iterates = std::iter::once(&start).chain(trajectory.iter());
        let (mut w0, mut l) = (0.0_f64, 0.0_f64);
        for w in iterates {
            if let Some(opt) = &optimum {
                w0 = w0.max(distance(w, opt));
            }
            l = l.max(max_sample_grad_norm(problem, w, &mut g));
        }
        w0_max = w0_max.max(w0);
        l_max = l_max.max(l);
        if optimum.is_some() && problem.meta().beta.is_some() {
            let b = thm31_bound(&Thm31Params {
                w0,
                lipschitz: Some(l),
                beta: problem.meta().beta,
                gamma: spec.gamma,
                q: spec.q,
                n: spec.n as f64,
                d: spec.d as f64,
                noise_sq_mean: 0.0,
                noise_mean: 0.0,
                taus: vec![spec.tau_over_eta * eta; steps as usize],
            })?;
            bound = Some(bound.map_or(b, |x: f64| x.max(b)));
        }
    }
    Ok(HorizonResult {
        steps,
        eta,
        gap: gaps.iter().sum::<f64>() / gaps.len() as f64,
        gaps,
        bound,
        w0_measured: w0_max,
        lipschitz_measured: l_max,
    })
}

pub fn run_convergence(spec: &ConvergenceSpec, seed: u64) -> Result<ConvergenceReport> {
    spec.validate()?;
    let problem = spec.problem.build(spec.n, spec.d, spec.hidden, seed)?;
    let problem = problem.as_ref();

    let horizons = spec
        .horizons
        .iter()
        .map(|&t| horizon(spec, problem, t, seed))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = horizons.iter().map(|h| h.steps as f64).collect();
    let ys: Vec<f64> = horizons.iter().map(|h| h.gap).collect();
    let slope = log_log_slope(&xs, &ys);
    let bound_holds = horizons
        .iter()
        .map(|h| h.bound.map(|b| h.gaps.iter().all(|g| *g <= b)))
        .collect::<Option<Vec<bool>>>()
        .map(|v| v.iter().all(|x| *x));

    let steps = spec.head_to_head_steps;
    let eta = spec.head_to_head_eta_factor * spec.eta(steps);
    let cfg = spec.mix_config(
        eta,
        spec.head_to_head_clip,
        spec.head_to_head_sigma,
        steps,
        seed,
    );
    let opts = TrainOptions {
        output: OutputMode::FinalOnly,
        log_every: 1,
    };
    let mut head_to_head = Vec::new();
    for method in [
        Method::Sgd,
        Method::Dpsgd,
        Method::Modelmix,
        Method::Strawman,
    ] {
        let out = train(
            problem,
            TrainerState::at(problem.initial_point(), seed),
            &cfg,
            method,
            &opts,
        )?;
        let norms: Vec<f64> = out.log.iter().map(|r| r.grad_norm).collect();
        let last = out.log.last().expect("at least one logged step");
        head_to_head.push(MethodResult {
            method,
            final_loss: last.loss,
            final_grad_norm: last.grad_norm,
            thm32_metric: thm32_metric(&norms, spec.head_to_head_clip),
            trajectory_hash: out.trajectory_hash,
        });
    }
    let thm32_bound = head_to_head_bound(spec, problem, &cfg)?;
    Ok(ConvergenceReport {
        horizons,
        slope,
        bound_holds,
        head_to_head,
        thm32_bound,
    })
}

fn thm32_metric(norms: &[f64], c: f64) -> f64 {
    norms
        .iter()
        .map(|&g| (0.45 * g * g).min(c / 20.0 * g))
        .sum::<f64>()
        / norms.len().max(1) as f64
}

fn head_to_head_bound(
    spec: &ConvergenceSpec,
    problem: &dyn Problem<f64>,
    cfg: &MixConfig<f64>,
) -> Result<Option<f64>> {
    let (Some(beta), Some(f_star)) = (problem.meta().beta, problem.optimal_loss()) else {
        return Ok(None);
    };
    if cfg.sigma == 0.0 {
        return Ok(None);
    }
    let acc = cfg.accountant_config(spec.n, spec.delta)?;
    let eps =
        crate::accountant::epsilon_at(&acc, &crate::accountant::OrderGrid::integer_default())?;
    let r_f = problem.loss(&problem.initial_point()) - f_star;
    let (_, bound) = thm32_metric_and_bound(
        &[0.0],
        &Thm32Params {
            c: spec.head_to_head_clip,
            beta: Some(beta),
            d: spec.d as f64,
            n: spec.n as f64,
            q: spec.q,
            eps,
            delta: spec.delta,
            r_f,
            w0_tilde: 0.0,
            v: spec.v,
            taus: vec![cfg.tau.min_tau(); cfg.iterations as usize],
        },
    )?;
    Ok(Some(bound))
}
