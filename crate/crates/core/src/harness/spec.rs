//! Experiment descriptions and the replayable result envelope.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::convergence::{run_convergence, ConvergenceSpec};
use super::example31::{run_example31, Example31Spec};
use super::fig4::{run_fig4, Fig4Spec};
use super::oracle::{mc_pointwise_loss, mc_validate_moments, PointwiseLoss};
use crate::accountant::{
    calibrate_sigma_with, compose_to_dp, log_moment, rdp_curve, AccountantConfig,
    CalibrationOptions, OrderGrid, PrivacySpend,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateSpec {
    /// Mechanism whose σ is solved for; its own σ is ignored.
    pub config: AccountantConfig,
    pub target_epsilon: f64,
    #[serde(default)]
    pub fractional_orders: bool,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
}

fn default_rel_tol() -> f64 {
    CalibrationOptions::default().rel_tol
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrateResult {
    pub sigma: f64,
    pub sigma_over_sensitivity: f64,
    pub spend: PrivacySpend,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    pub config: AccountantConfig,
    pub ks: Vec<u32>,
    pub samples: u64,
    #[serde(default)]
    pub pointwise: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentComparison {
    pub k: u32,
    pub quadrature: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub z_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub moments: Vec<MomentComparison>,
    pub pointwise: Option<PointwiseLoss>,
    /// Every |z| ≤ 3.
    pub pass: bool,
}

/// One experiment: its kind, the payload for that kind, and where results go.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(flatten)]
    pub payload: Payload,
    #[serde(default)]
    pub output: Option<std::path::PathBuf>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "config", rename_all = "lowercase")]
pub enum Payload {
    Fig4(Fig4Spec),
    Convergence(ConvergenceSpec),
    Calibrate(CalibrateSpec),
    Oracle(OracleSpec),
    Example31(Example31Spec),
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        match &self.payload {
            Payload::Fig4(s) => s.validate(),
            Payload::Convergence(s) => s.validate(),
            Payload::Calibrate(s) => {
                s.config.validate()?;
                if !(s.target_epsilon > 0.0 && s.rel_tol > 0.0) {
                    return Err(Error::contract(
                        "calibrate spec: target epsilon and tolerance must be positive",
                    ));
                }
                Ok(())
            }
            Payload::Oracle(s) => {
                s.config.validate()?;
                if s.ks.is_empty() {
                    return Err(Error::contract("oracle spec: no moment orders given"));
                }
                Ok(())
            }
            Payload::Example31(_) => Ok(()),
        }
    }

    /// Parses and validates.
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)
            .map_err(|e| Error::contract(format!("experiment spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Git-style content hash: SHA-256 of `"blob <len>\0"` followed by the bytes.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

/// `{spec, hash, results, seed}` where `hash` covers the compact JSON of `spec`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub spec: ExperimentSpec,
    pub hash: String,
    pub results: serde_json::Value,
    pub seed: u64,
}

impl Envelope {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

pub fn spec_hash(spec: &ExperimentSpec) -> Result<String> {
    Ok(content_hash(serde_json::to_string(spec)?.as_bytes()))
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<Envelope> {
    spec.validate()?;
    let seed = spec.seed;
    let results = match &spec.payload {
        Payload::Fig4(s) => {
            let mut s = s.clone();
            s.seed = seed;
            serde_json::to_value(run_fig4(&s)?)?
        }
        Payload::Convergence(s) => serde_json::to_value(run_convergence(s, seed)?)?,
        Payload::Calibrate(s) => serde_json::to_value(run_calibrate(s)?)?,
        Payload::Oracle(s) => serde_json::to_value(run_oracle(s, seed)?)?,
        Payload::Example31(s) => serde_json::to_value(run_example31(s, seed)?)?,
    };
    Ok(Envelope {
        hash: spec_hash(spec)?,
        spec: spec.clone(),
        results,
        seed,
    })
}

pub fn run_calibrate(spec: &CalibrateSpec) -> Result<CalibrateResult> {
    let grid = if spec.fractional_orders {
        OrderGrid::with_fractional()
    } else {
        OrderGrid::integer_default()
    };
    let opts = CalibrationOptions {
        rel_tol: spec.rel_tol,
        ..CalibrationOptions::default()
    };
    let sigma = calibrate_sigma_with(spec.target_epsilon, &spec.config, &grid, &opts)?;
    let config = spec.config.with_sigma(sigma);
    let spend = compose_to_dp(&rdp_curve(&config, &grid)?, config.iterations, config.delta)?;
    Ok(CalibrateResult {
        sigma,
        sigma_over_sensitivity: sigma / config.sensitivity,
        spend,
    })
}

pub fn run_oracle(spec: &OracleSpec, seed: u64) -> Result<OracleResult> {
    let (p0, p1) = spec.config.kernels()?;
    let moments = mc_validate_moments(&p0, &p1, &spec.ks, spec.samples, seed)?
        .into_iter()
        .map(|m| {
            let quadrature = log_moment(&p0, &p1, m.k)?.exp();
            let diff = (m.estimate - quadrature).abs();
            Ok(MomentComparison {
                k: m.k,
                quadrature,
                estimate: m.estimate,
                std_error: m.std_error,
                z_score: if diff == 0.0 { 0.0 } else { diff / m.std_error },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pointwise = if spec.pointwise {
        Some(mc_pointwise_loss(
            &p0,
            &p1,
            spec.samples,
            seed.wrapping_add(1),
        )?)
    } else {
        None
    };
    Ok(OracleResult {
        pass: moments.iter().all(|m| m.z_score <= 3.0),
        moments,
        pointwise,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayOutcome {
    /// The stored hash matches the stored spec.
    pub hash_matches: bool,
    /// Re-running the stored spec reproduced the file byte for byte.
    pub identical: bool,
}

/// Re-runs the spec recorded in an envelope file and compares the output bytes.
pub fn replay(envelope_json: &str) -> Result<ReplayOutcome> {
    let stored: Envelope = serde_json::from_str(envelope_json)?;
    let hash_matches = spec_hash(&stored.spec)? == stored.hash;
    let rerun = run_experiment(&stored.spec)?;
    Ok(ReplayOutcome {
        hash_matches,
        identical: rerun.to_json()? == envelope_json,
    })
}
