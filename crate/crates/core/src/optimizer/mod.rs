//! ModelMix DP-SGD, the clipped DP-SGD baseline, plain SGD and the two-model
//! straw-man, all driven by one seeded stream discipline: sub-step k draws
//! its subsample, mixing weights and noise from streams 3k, 3k+1 and 3k+2.

mod config;
mod run;
mod steps;

pub use config::{Aggregation, AlphaMode, MixConfig, TauSchedule};
pub use run::{
    read_checkpoint, train, write_checkpoint, write_ndjson, LogRecord, Method, OutputMode,
    TrainOptions, TrainOutcome,
};
pub use steps::{
    clipped_gradient, dpsgd_step, enforce_separation, modelmix_step, poisson_sample, sgd_step,
    strawman_alternating_step, StepInfo, StepStreams, TrainerState,
};
