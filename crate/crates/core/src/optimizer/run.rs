use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::MixConfig;
use super::steps::{
    dpsgd_step, modelmix_step, sgd_step, strawman_alternating_step, StepInfo, TrainerState,
};
use crate::error::{Error, Result};
use crate::problems::Problem;
use crate::scalar::{norm2, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sgd,
    Dpsgd,
    Modelmix,
    Strawman,
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(Method::Sgd),
            "dpsgd" => Ok(Method::Dpsgd),
            "modelmix" => Ok(Method::Modelmix),
            "strawman" => Ok(Method::Strawman),
            other => Err(Error::contract(format!("unknown method '{other}'"))),
        }
    }
}

/// Which iterates a run hands back.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputMode {
    #[default]
    FinalOnly,
    FullTrajectory,
}

/// One line of the NDJSON trajectory log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub k: u64,
    pub loss: f64,
    /// ‖∇F(w_k)‖ of the full-batch gradient.
    pub grad_norm: f64,
    pub min_coord_gap: f64,
    pub batch_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome<T> {
    pub final_state: TrainerState<T>,
    /// Σ_k (w_{k−1} + w_{k−2}) / 2T over the steps taken.
    pub w_bar: Vec<T>,
    pub log: Vec<LogRecord>,
    /// Every published iterate w_1..w_T when requested.
    pub trajectory: Option<Vec<Vec<T>>>,
    /// SHA-256 over the little-endian f64 bytes of w_1..w_T.
    pub trajectory_hash: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub output: OutputMode,
    /// Log every `log_every` steps; 0 disables logging.
    pub log_every: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            output: OutputMode::FinalOnly,
            log_every: 1,
        }
    }
}

/// Runs `cfg.iterations` steps of `method` from `start`.
///
/// The strawman's second model starts at the same iterate; its first model is reported.
pub fn train<T: Scalar, P: Problem<T> + ?Sized>(
    problem: &P,
    start: TrainerState<T>,
    cfg: &MixConfig<T>,
    method: Method,
    opts: &TrainOptions,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    let d = problem.dim();
    if start.dim() != d {
        return Err(Error::contract(
            "start state dimension does not match problem",
        ));
    }
    let mut state = start;
    let mut twin = state.clone();
    let mut sum = vec![T::zero(); d];
    let mut hasher = Sha256::new();
    let mut log = Vec::new();
    let mut trajectory = (opts.output == OutputMode::FullTrajectory).then(Vec::new);
    let mut grad = vec![T::zero(); d];
    let half = T::of(0.5);

    for _ in 0..cfg.iterations {
        for ((s, &a), &b) in sum.iter_mut().zip(&state.w_curr).zip(&state.w_prev) {
            *s = *s + half * (a + b);
        }
        let info: StepInfo;
        (state, info) = match method {
            Method::Modelmix => modelmix_step(&state, problem, cfg)?,
            Method::Dpsgd => dpsgd_step(&state, problem, cfg)?,
            Method::Sgd => sgd_step(&state, problem, cfg.eta, cfg.q)?,
            Method::Strawman => {
                let gap = min_abs_gap(&state.w_curr, &twin.w_curr);
                let (a, b) = strawman_alternating_step(&state, &twin, problem, cfg)?;
                twin = b;
                (
                    a,
                    StepInfo {
                        batch_size: 0,
                        grad_norm: f64::NAN,
                        min_coord_gap: gap,
                    },
                )
            }
        };
        for v in &state.w_curr {
            hasher.update(v.to_f64_lossy().to_le_bytes());
        }
        if let Some(t) = trajectory.as_mut() {
            t.push(state.w_curr.clone());
        }
        if opts.log_every > 0
            && (state.k.is_multiple_of(opts.log_every) || state.k == cfg.iterations)
        {
            problem.full_grad(&state.w_curr, &mut grad);
            log.push(LogRecord {
                k: state.k,
                loss: problem.loss(&state.w_curr).to_f64_lossy(),
                grad_norm: norm2(&grad).to_f64_lossy(),
                min_coord_gap: info.min_coord_gap,
                batch_size: info.batch_size,
            });
        }
    }
    let inv = if cfg.iterations > 0 {
        T::one() / T::of(cfg.iterations as f64)
    } else {
        T::zero()
    };
    Ok(TrainOutcome {
        w_bar: sum.into_iter().map(|s| s * inv).collect(),
        final_state: state,
        log,
        trajectory,
        trajectory_hash: hex::encode(hasher.finalize()),
    })
}

fn min_abs_gap<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y).abs().to_f64_lossy())
        .fold(f64::INFINITY, f64::min)
}

/// Writes one JSON object per record.
pub fn write_ndjson<W: Write>(mut out: W, log: &[LogRecord]) -> Result<()> {
    for r in log {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// 8-byte little-endian dimension, then the values as little-endian f64.
pub fn write_checkpoint<T: Scalar>(path: &Path, w: &[T]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(&(w.len() as u64).to_le_bytes())?;
    for v in w {
        out.write_all(&v.to_f64_lossy().to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_checkpoint<T: Scalar>(path: &Path) -> Result<Vec<T>> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 8 {
        return Err(Error::contract(
            "checkpoint is missing its dimension header",
        ));
    }
    let d = u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes")) as usize;
    if bytes.len() != 8 + 8 * d {
        return Err(Error::contract(format!(
            "checkpoint declares {d} values but holds {} bytes",
            bytes.len() - 8
        )));
    }
    Ok(bytes[8..]
        .chunks_exact(8)
        .map(|c| T::of(f64::from_le_bytes(c.try_into().expect("8 bytes"))))
        .collect())
}
