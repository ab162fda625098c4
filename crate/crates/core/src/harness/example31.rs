//! The three-point clipping pathology: with a small threshold the clipped
//! full-batch update points away from the optimum.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::clipping::ClipConfig;
use crate::error::{Error, Result};
use crate::optimizer::{
    train, Aggregation, AlphaMode, Method, MixConfig, OutputMode, TauSchedule, TrainOptions,
    TrainerState,
};
use crate::problems::{example_31, expected_clipped_gradient_exact, Problem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Example31Spec {
    pub eta: f64,
    pub w0: i64,
    pub small_clip: i64,
    pub small_steps: u64,
    pub large_clip: i64,
    pub large_steps: u64,
}

impl Default for Example31Spec {
    fn default() -> Self {
        Self {
            eta: 0.1,
            w0: 0,
            small_clip: 1,
            small_steps: 100,
            large_clip: 200,
            large_steps: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipRun {
    pub clip: i64,
    pub steps: u64,
    /// Mean clipped gradient at w₀ as an exact fraction.
    pub expected_gradient_at_start: String,
    /// Mean clipped gradient at w* = 20 as an exact fraction.
    pub expected_gradient_at_optimum: String,
    pub final_w: f64,
    pub distance_to_optimum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example31Report {
    pub optimum: f64,
    pub runs: Vec<ClipRun>,
}

/// Full-batch clipped gradient descent, σ = 0, with mean aggregation, so
/// each step follows the exact expected clipped gradient.
pub fn run_example31(spec: &Example31Spec, seed: u64) -> Result<Example31Report> {
    if !(spec.eta > 0.0) || spec.small_clip <= 0 || spec.large_clip <= 0 {
        return Err(Error::contract(
            "example31 spec: eta and clipping norms must be positive",
        ));
    }
    let problem = example_31::<f64>();
    let optimum = problem.meta().optimum.as_ref().expect("example31 optimum")[0];
    let run = |clip: i64, steps: u64| -> Result<ClipRun> {
        let cfg = MixConfig {
            eta: spec.eta,
            clip: ClipConfig::l2(clip as f64),
            tau: TauSchedule::Constant(0.0),
            q: 1.0,
            sigma: 0.0,
            iterations: steps,
            seed,
            aggregation: Aggregation::Mean,
            alpha: AlphaMode::Fixed(1.0),
        };
        let start = TrainerState::at(vec![spec.w0 as f64], seed);
        let opts = TrainOptions {
            output: OutputMode::FinalOnly,
            log_every: 0,
        };
        let out = train(&problem, start, &cfg, Method::Dpsgd, &opts)?;
        let c = Ratio::from_integer(clip);
        let final_w = out.final_state.w_curr[0];
        Ok(ClipRun {
            clip,
            steps,
            expected_gradient_at_start: expected_clipped_gradient_exact(
                Ratio::from_integer(spec.w0),
                c,
            )
            .to_string(),
            expected_gradient_at_optimum: expected_clipped_gradient_exact(
                Ratio::from_integer(20),
                c,
            )
            .to_string(),
            final_w,
            distance_to_optimum: (final_w - optimum).abs(),
        })
    };
    Ok(Example31Report {
        optimum,
        runs: vec![
            run(spec.small_clip, spec.small_steps)?,
            run(spec.large_clip, spec.large_steps)?,
        ],
    })
}
