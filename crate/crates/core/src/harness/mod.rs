//! Experiment drivers, the replayable result envelope, and the Monte-Carlo
//! verification oracle.

pub mod convergence;
pub mod example31;
pub mod fig4;
pub mod oracle;
pub mod problem;
pub mod spec;

pub use convergence::{
    log_log_slope, run_convergence, ConvergenceReport, ConvergenceSpec, HorizonResult, MethodResult,
};
pub use example31::{run_example31, ClipRun, Example31Report, Example31Spec};
pub use fig4::{
    run_fig4, Endpoint, Fig4Report, Fig4Row, Fig4Spec, Fig4Status, OracleCheck, FIG4_TARGETS,
};
pub use oracle::{
    mc_mixture_moment, mc_pointwise_loss, mc_validate_moments, sample_kernel, McEstimate,
    MomentEstimate, PointwiseLoss,
};
pub use problem::ProblemKind;
pub use spec::{
    content_hash, replay, run_calibrate, run_experiment, run_oracle, spec_hash, CalibrateResult,
    CalibrateSpec, Envelope, ExperimentSpec, OracleResult, OracleSpec, Payload, ReplayOutcome,
};
