//! Rényi-DP accounting for the subsampled ModelMix mechanism.
//!
//! One step of ModelMix releases, per coordinate, a sample from the mixture
//! kernel `P0` (no differing element) or the subsampled mixture
//! `(1−q)·P0 + q·P1` where `P1` is `P0` moved by the per-coordinate
//! sensitivity. [`rdp_curve`] tabulates the per-step Rényi divergence over a
//! grid of orders, [`compose_to_dp`] composes over T steps and converts to
//! (ε, δ), and [`calibrate_sigma`] inverts the pipeline.

mod asymptotic;
mod calibrate;
mod compose;
mod config;
mod moments;
mod rdp;
mod record;
mod split;

pub use asymptotic::{asymptotic_epsilon, AsymptoticEstimate};
pub use calibrate::{calibrate_sigma, calibrate_sigma_with, epsilon_at, CalibrationOptions};
pub use compose::{
    advanced_composition, compose_to_dp, epsilon_trajectory, AdvancedComposition, PrivacySpend,
};
pub use config::AccountantConfig;
pub use moments::{log_moment, log_moments, moment_a_k};
pub use rdp::{
    binomial_divergence, rdp_curve, rdp_step, rdp_step_fractional, OrderGrid, RdpCurve, RdpEntry,
};
pub use record::{account, AccountRecord};
pub use split::worst_case_split_check;
