use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use modelmix::accountant::{account, AccountantConfig, OrderGrid};
use modelmix::clipping::ClipConfig;
use modelmix::harness::{
    replay, run_calibrate, run_example31, run_experiment, run_oracle, CalibrateSpec, Example31Spec,
    ExperimentSpec, Fig4Spec, OracleSpec, Payload, ProblemKind,
};
use modelmix::optimizer::{
    train, write_checkpoint, write_ndjson, Aggregation, AlphaMode, Method, MixConfig, OutputMode,
    TauSchedule, TrainOptions, TrainerState,
};
use modelmix::{Error, NoiseFamily};
use serde_json::json;

/// Privacy accounting and private optimization with ModelMix.
#[derive(Debug, Parser)]
#[command(name = "modelmix", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Per-step Rényi curve and the composed (ε, δ) of one mechanism.
    Account(AccountArgs),
    /// Solve for the noise scale that meets a target ε.
    Calibrate(CalibrateArgs),
    /// Train on a synthetic problem and report the trajectory hash.
    Train(TrainArgs),
    /// Reproduce the privacy-amplification sweep: calibrated baseline, three τ, three p.
    #[command(name = "reproduce-fig4")]
    ReproduceFig4(Fig4Args),
    /// Clipped gradient descent on the three-point example with a small and a large threshold.
    Example31(Example31Args),
    /// Monte-Carlo check of the accountant's moments for one mechanism.
    Oracle(OracleArgs),
    /// Run an experiment spec file and write its result envelope.
    Run(RunArgs),
    /// Re-run the spec stored in an envelope and compare byte for byte.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Output {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Family {
    Gaussian,
    Laplace,
}

#[derive(Debug, Args)]
struct MechanismArgs {
    /// Poisson sampling rate.
    #[arg(long)]
    q: f64,
    /// Noise scale, in the same units as the sensitivity.
    #[arg(long)]
    sigma: Option<f64>,
    /// Per-step sensitivity (c for summed gradients, c/(nq) for averaged ones).
    #[arg(long)]
    sensitivity: f64,
    /// Number of coordinates of the l∞ truncation (1 disables it).
    #[arg(long, default_value_t = 1)]
    p: u32,
    /// Mixing threshold τ.
    #[arg(long, default_value_t = 0.0)]
    tau: f64,
    /// Step size η; the mixing half-width is τ/(2η).
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    /// Number of iterations.
    #[arg(long = "T")]
    iterations: u64,
    /// Target δ.
    #[arg(long)]
    delta: f64,
    /// Base noise family.
    #[arg(long, value_enum, default_value_t = Family::Gaussian)]
    family: Family,
    /// Also use the orders 1.1..10.9 (p = 1 only).
    #[arg(long)]
    fractional: bool,
}

impl MechanismArgs {
    fn config(&self, sigma: f64) -> AccountantConfig {
        AccountantConfig {
            q: self.q,
            sigma,
            sensitivity: self.sensitivity,
            p: self.p,
            tau: self.tau,
            eta: self.eta,
            iterations: self.iterations,
            delta: self.delta,
            family: match self.family {
                Family::Gaussian => NoiseFamily::Gaussian,
                Family::Laplace => NoiseFamily::Laplace,
            },
        }
    }

    fn grid(&self) -> OrderGrid {
        if self.fractional {
            OrderGrid::with_fractional()
        } else {
            OrderGrid::integer_default()
        }
    }

    fn require_sigma(&self) -> Result<f64, Error> {
        self.sigma
            .ok_or_else(|| Error::Contract("--sigma is required".into()))
    }
}

#[derive(Debug, Args)]
struct AccountArgs {
    #[command(flatten)]
    mechanism: MechanismArgs,
    #[arg(long, value_enum, default_value_t = Output::Json)]
    output: Output,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[command(flatten)]
    mechanism: MechanismArgs,
    /// ε to calibrate to.
    #[arg(long)]
    target_epsilon: f64,
    /// Relative tolerance on ε.
    #[arg(long, default_value_t = 1e-6)]
    rel_tol: f64,
    #[arg(long, value_enum, default_value_t = Output::Json)]
    output: Output,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Sgd,
    Dpsgd,
    Modelmix,
    Strawman,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProblemArg {
    LeastSquares,
    Logistic,
    Mlp,
    Example31,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AggregationArg {
    Sum,
    Mean,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long, value_enum, default_value_t = ProblemArg::LeastSquares)]
    problem: ProblemArg,
    /// Sample count of the synthetic problem.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Feature dimension (the MLP's input width).
    #[arg(long, default_value_t = 20)]
    d: usize,
    /// Hidden width of the MLP.
    #[arg(long, default_value_t = 16)]
    hidden: usize,
    /// Seed of the synthetic data; defaults to --seed.
    #[arg(long)]
    data_seed: Option<u64>,
    /// ModelMix (on) or the clipped DP-SGD baseline (off).
    #[arg(long, value_enum, default_value_t = Switch::On)]
    mix: Switch,
    /// Optimizer; overrides --mix.
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Step size η.
    #[arg(long, default_value_t = 1e-3)]
    eta: f64,
    /// Clipping norm c.
    #[arg(long, default_value_t = 1.0)]
    clip: f64,
    /// Coordinates of the l∞ truncation; c/√p caps each coordinate.
    #[arg(long, default_value_t = 1)]
    p: u32,
    /// Constant mixing threshold τ.
    #[arg(long, default_value_t = 0.0)]
    tau: f64,
    /// Poisson sampling rate.
    #[arg(long, default_value_t = 0.1)]
    q: f64,
    /// Noise standard deviation per coordinate.
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    /// Number of iterations.
    #[arg(long = "T", default_value_t = 1000)]
    iterations: u64,
    /// Master seed of the run.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = AggregationArg::Sum)]
    aggregation: AggregationArg,
    /// Use this constant mixing weight instead of U[0,1] draws.
    #[arg(long)]
    alpha_fixed: Option<f64>,
    /// Write the NDJSON trajectory log here.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Log every this many steps.
    #[arg(long, default_value_t = 1)]
    log_every: u64,
    /// Write the final iterate as a binary checkpoint here.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Write every iterate, one JSON array per line, here.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    /// δ used to report the run's (ε, δ); the accountant is skipped when σ = 0.
    #[arg(long, default_value_t = 1e-5)]
    delta: f64,
    #[arg(long, value_enum, default_value_t = Output::Json)]
    output: Output,
}

#[derive(Debug, Args)]
struct Fig4Args {
    /// JSON file overriding the default sweep settings.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Monte-Carlo draws per endpoint for the oracle gate; 0 skips it.
    #[arg(long)]
    oracle_samples: Option<u64>,
    /// Seed of the oracle gate.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for the per-rate curve CSVs and the result envelope.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Output::Csv)]
    output: Output,
}

#[derive(Debug, Args)]
struct Example31Args {
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    #[arg(long, default_value_t = 100)]
    small_steps: u64,
    #[arg(long, default_value_t = 500)]
    large_steps: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Output::Json)]
    output: Output,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[command(flatten)]
    mechanism: MechanismArgs,
    /// Moment orders to check, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
    k: Vec<u32>,
    /// Monte-Carlo draws.
    #[arg(long, default_value_t = 1_000_000)]
    samples: u64,
    /// Also report the pointwise privacy-loss moments.
    #[arg(long)]
    pointwise: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Output::Json)]
    output: Output,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Experiment spec JSON.
    spec: PathBuf,
    /// Envelope destination; defaults to the spec's own output path, else stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    /// Envelope JSON written by `run` or `reproduce-fig4`.
    envelope: PathBuf,
}

fn main() -> ExitCode {
    // exit quietly when stdout is closed early, e.g. piped into `head`
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Account(a) => cmd_account(a),
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::Train(a) => cmd_train(a),
        Command::ReproduceFig4(a) => cmd_fig4(a),
        Command::Example31(a) => cmd_example31(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Run(a) => cmd_run(a),
        Command::Replay(a) => cmd_replay(a),
    }
}

fn announce(config: &impl serde::Serialize, seed: Option<u64>) -> Result<(), Error> {
    eprintln!("resolved config: {}", serde_json::to_string(config)?);
    match seed {
        Some(s) => eprintln!("seed: {s}"),
        None => eprintln!("seed: none (deterministic)"),
    }
    Ok(())
}

fn print_json(value: &impl serde::Serialize) -> Result<(), Error> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn cmd_account(a: AccountArgs) -> Result<ExitCode, Error> {
    let config = a.mechanism.config(a.mechanism.require_sigma()?);
    config.validate()?;
    announce(&config, None)?;
    let record = account(&config, &a.mechanism.grid())?;
    match a.output {
        Output::Json => print_json(&record)?,
        Output::Csv => {
            println!("alpha,eps_step");
            for e in &record.curve.entries {
                println!("{},{:e}", e.alpha, e.eps);
            }
            eprintln!(
                "epsilon: {} delta: {:e} alpha: {}",
                record.spend.epsilon, record.spend.delta, record.spend.argmin_alpha
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_calibrate(a: CalibrateArgs) -> Result<ExitCode, Error> {
    let spec = CalibrateSpec {
        config: a.mechanism.config(a.mechanism.sigma.unwrap_or(1.0)),
        target_epsilon: a.target_epsilon,
        fractional_orders: a.mechanism.fractional,
        rel_tol: a.rel_tol,
    };
    spec.config.validate()?;
    announce(&spec, None)?;
    let result = run_calibrate(&spec)?;
    match a.output {
        Output::Json => print_json(&result)?,
        Output::Csv => {
            println!("sigma,sigma_over_sensitivity,epsilon,delta,alpha_star");
            println!(
                "{},{},{},{:e},{}",
                result.sigma,
                result.sigma_over_sensitivity,
                result.spend.epsilon,
                result.spend.delta,
                result.spend.argmin_alpha
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_train(a: TrainArgs) -> Result<ExitCode, Error> {
    let kind = match a.problem {
        ProblemArg::LeastSquares => ProblemKind::LeastSquares,
        ProblemArg::Logistic => ProblemKind::Logistic,
        ProblemArg::Mlp => ProblemKind::Mlp,
        ProblemArg::Example31 => ProblemKind::Example31,
    };
    let method = match (a.method, a.mix) {
        (Some(MethodArg::Sgd), _) => Method::Sgd,
        (Some(MethodArg::Dpsgd), _) | (None, Switch::Off) => Method::Dpsgd,
        (Some(MethodArg::Modelmix), _) | (None, Switch::On) => Method::Modelmix,
        (Some(MethodArg::Strawman), _) => Method::Strawman,
    };
    let data_seed = a.data_seed.unwrap_or(a.seed);
    let problem = kind.build(a.n, a.d, a.hidden, data_seed)?;
    let cfg = MixConfig {
        eta: a.eta,
        clip: ClipConfig::new(a.clip, a.p)?,
        tau: TauSchedule::Constant(a.tau),
        q: a.q,
        sigma: a.sigma,
        iterations: a.iterations,
        seed: a.seed,
        aggregation: match a.aggregation {
            AggregationArg::Sum => Aggregation::Sum,
            AggregationArg::Mean => Aggregation::Mean,
        },
        alpha: a.alpha_fixed.map_or(AlphaMode::Uniform, AlphaMode::Fixed),
    };
    cfg.validate()?;
    announce(
        &json!({"problem": kind, "n": problem.n(), "d": problem.dim(), "data_seed": data_seed, "method": method, "config": cfg}),
        Some(a.seed),
    )?;
    let opts = TrainOptions {
        output: if a.trajectory.is_some() {
            OutputMode::FullTrajectory
        } else {
            OutputMode::FinalOnly
        },
        log_every: if a.log.is_some() || matches!(a.output, Output::Csv) {
            a.log_every.max(1)
        } else {
            0
        },
    };
    let start = TrainerState::at(problem.initial_point(), a.seed);
    let run = train(problem.as_ref(), start, &cfg, method, &opts)?;

    if let Some(path) = &a.log {
        write_ndjson(std::io::BufWriter::new(fs::File::create(path)?), &run.log)?;
    }
    if let Some(path) = &a.checkpoint {
        write_checkpoint(path, &run.final_state.w_curr)?;
    }
    if let (Some(path), Some(traj)) = (&a.trajectory, &run.trajectory) {
        let mut out = std::io::BufWriter::new(fs::File::create(path)?);
        for w in traj {
            serde_json::to_writer(&mut out, w)?;
            out.write_all(b"\n")?;
        }
    }
    let privacy = if a.sigma > 0.0 {
        let acc = cfg.accountant_config(problem.n(), a.delta)?;
        let record = account(&acc, &OrderGrid::integer_default())?;
        Some(json!({"accountant": acc, "spend": record.spend}))
    } else {
        None
    };
    let w = &run.final_state.w_curr;
    match a.output {
        Output::Json => print_json(&json!({
            "method": method,
            "steps": run.final_state.k,
            "final_loss": problem.loss(w),
            "averaged_loss": problem.loss(&run.w_bar),
            "optimal_loss": problem.optimal_loss(),
            "trajectory_hash": run.trajectory_hash,
            "privacy": privacy,
        }))?,
        Output::Csv => {
            println!("k,loss,grad_norm,min_coord_gap,batch_size");
            for r in &run.log {
                println!(
                    "{},{},{},{},{}",
                    r.k, r.loss, r.grad_norm, r.min_coord_gap, r.batch_size
                );
            }
            eprintln!("trajectory_hash: {}", run.trajectory_hash);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn read_text(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path)
        .map_err(|e| Error::Contract(format!("cannot read {}: {e}", path.display())))
}

fn cmd_fig4(a: Fig4Args) -> Result<ExitCode, Error> {
    let mut spec: Fig4Spec = match &a.spec {
        Some(path) => serde_json::from_str(&read_text(path)?)
            .map_err(|e| Error::Contract(format!("fig4 spec: {e}")))?,
        None => Fig4Spec::default(),
    };
    if let Some(n) = a.oracle_samples {
        spec.oracle_samples = n;
    }
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    let experiment = ExperimentSpec {
        payload: Payload::Fig4(spec.clone()),
        output: None,
        seed: spec.seed,
    };
    experiment.validate()?;
    announce(&spec, Some(spec.seed))?;
    let envelope = run_experiment(&experiment)?;
    let report: modelmix::harness::Fig4Report = serde_json::from_value(envelope.results.clone())?;

    if let Some(dir) = &a.out_dir {
        fs::create_dir_all(dir)?;
        for &(q, _, _) in &report.sigmas {
            fs::write(dir.join(format!("fig4_q{q}.csv")), report.csv(q))?;
        }
        fs::write(dir.join("fig4_envelope.json"), envelope.to_json()?)?;
    }
    match a.output {
        Output::Json => print_json(&report)?,
        Output::Csv => {
            println!("tau_over_eta,p,T,epsilon,delta,alpha_star");
            for r in report
                .rows
                .iter()
                .filter(|r| r.q == spec.q && r.tau_over_eta > 0.0 && r.steps == spec.iterations)
            {
                println!(
                    "{},{},{},{:.6},{:e},{}",
                    r.tau_over_eta, r.p, r.steps, r.epsilon, r.delta, r.alpha_star
                );
            }
        }
    }
    for (q, sigma, ratio) in &report.sigmas {
        eprintln!("q={q}: calibrated sigma={sigma} (sigma/s={ratio})");
    }
    for e in &report.endpoints {
        eprintln!(
            "tau/eta={} p={}: epsilon={:.3} target={} rel_dev={:+.4}",
            e.tau_over_eta, e.p, e.epsilon, e.target, e.rel_dev
        );
    }
    eprintln!(
        "status: {}",
        serde_json::to_value(report.status)?.as_str().unwrap_or("?")
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_example31(a: Example31Args) -> Result<ExitCode, Error> {
    let spec = Example31Spec {
        eta: a.eta,
        small_steps: a.small_steps,
        large_steps: a.large_steps,
        ..Example31Spec::default()
    };
    announce(&spec, Some(a.seed))?;
    let report = run_example31(&spec, a.seed)?;
    match a.output {
        Output::Json => print_json(&report)?,
        Output::Csv => {
            println!("clip,steps,expected_gradient_at_start,expected_gradient_at_optimum,final_w,distance_to_optimum");
            for r in &report.runs {
                println!(
                    "{},{},{},{},{},{:e}",
                    r.clip,
                    r.steps,
                    r.expected_gradient_at_start,
                    r.expected_gradient_at_optimum,
                    r.final_w,
                    r.distance_to_optimum
                );
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_oracle(a: OracleArgs) -> Result<ExitCode, Error> {
    let spec = OracleSpec {
        config: a.mechanism.config(a.mechanism.require_sigma()?),
        ks: a.k,
        samples: a.samples,
        pointwise: a.pointwise,
    };
    spec.config.validate()?;
    announce(&spec, Some(a.seed))?;
    let result = run_oracle(&spec, a.seed)?;
    match a.output {
        Output::Json => print_json(&result)?,
        Output::Csv => {
            println!("k,quadrature,estimate,std_error,z_score");
            for m in &result.moments {
                println!(
                    "{},{:e},{:e},{:e},{}",
                    m.k, m.quadrature, m.estimate, m.std_error, m.z_score
                );
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_run(a: RunArgs) -> Result<ExitCode, Error> {
    let spec = ExperimentSpec::from_json(&read_text(&a.spec)?)?;
    announce(&spec, Some(spec.seed))?;
    let text = run_experiment(&spec)?.to_json()?;
    match a.out.as_ref().or(spec.output.as_ref()) {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_replay(a: ReplayArgs) -> Result<ExitCode, Error> {
    let outcome = replay(&read_text(&a.envelope)?)?;
    print_json(&outcome)?;
    Ok(if outcome.hash_matches && outcome.identical {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
