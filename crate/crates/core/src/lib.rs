//! Private optimization with ModelMix: a randomized iterate-mixing variant of
//! DP-SGD, a numerical Rényi-DP accountant for the resulting
//! Gaussian/Laplace-plus-uniform mechanism, and the tooling to check both.
//!
//! The optimizer, clipping and problem code is generic over [`Scalar`]
//! (`f32` or `f64`); densities, quadrature and accounting run in `f64`.

#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord)]

pub mod accountant;
pub mod clipping;
pub mod error;
pub mod harness;
pub mod kernel;
pub mod optimizer;
pub mod problems;
pub mod quadrature;
pub mod scalar;
pub mod special;

pub use accountant::{AccountantConfig, OrderGrid, PrivacySpend, RdpCurve};
pub use error::{Error, Result};
pub use kernel::{MixtureKernel, NoiseFamily};
pub use scalar::Scalar;

pub type ClipConfig64 = clipping::ClipConfig<f64>;
pub type ClipConfig32 = clipping::ClipConfig<f32>;
pub type MixConfig64 = optimizer::MixConfig<f64>;
pub type MixConfig32 = optimizer::MixConfig<f32>;
pub type TrainerState64 = optimizer::TrainerState<f64>;
pub type TrainerState32 = optimizer::TrainerState<f32>;
pub type LeastSquares64 = problems::LeastSquares<f64>;
pub type Logistic64 = problems::Logistic<f64>;
pub type Mlp64 = problems::Mlp<f64>;
