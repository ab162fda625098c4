use modelmix::accountant::AccountantConfig;
use modelmix::clipping::ClipConfig;
use modelmix::optimizer::{
    clipped_gradient, dpsgd_step, enforce_separation, modelmix_step, poisson_sample,
    read_checkpoint, sgd_step, strawman_alternating_step, train, write_checkpoint, write_ndjson,
    Aggregation, AlphaMode, LogRecord, Method, MixConfig, OutputMode, TauSchedule, TrainOptions,
    TrainerState,
};
use modelmix::problems::{
    example_31, make_least_squares, make_logistic, make_mlp, Dataset, LeastSquares, Problem,
};
use modelmix::scalar::norm2;
use modelmix::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cfg(eta: f64, c: f64, tau: f64, q: f64, sigma: f64, t: u64) -> MixConfig<f64> {
    MixConfig {
        eta,
        clip: ClipConfig::l2(c),
        tau: TauSchedule::Constant(tau),
        q,
        sigma,
        iterations: t,
        seed: 99,
        aggregation: Aggregation::Sum,
        alpha: AlphaMode::Uniform,
    }
}

fn identity_quadratic(d: usize) -> LeastSquares<f64> {
    let mut x = vec![0.0; d * d];
    for j in 0..d {
        x[j * d + j] = 1.0;
    }
    LeastSquares::from_data(Dataset::new(d, d, x, vec![0.0; d]).unwrap()).unwrap()
}

#[test]
fn poisson_sampling_edges_and_rate() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert!(poisson_sample(100, 0.0, &mut rng).is_empty());
    assert_eq!(
        poisson_sample(100, 1.0, &mut rng),
        (0..100).collect::<Vec<_>>()
    );
    let sizes: Vec<f64> = (0..100)
        .map(|_| poisson_sample(10_000, 0.05, &mut rng).len() as f64)
        .collect();
    let sd = (500.0 * 0.95f64).sqrt();
    assert!(sizes.iter().all(|s| (s - 500.0).abs() <= 5.0 * sd));
    let mean = sizes.iter().sum::<f64>() / 100.0;
    assert!((mean - 500.0).abs() <= 3.0 * sd / 10.0, "{mean}");
}

#[test]
fn identical_states_reduce_to_clipped_sgd() {
    let p = make_least_squares::<f64>(200, 5, 3).unwrap();
    let c = cfg(0.01, 5.0, 0.0, 0.3, 0.0, 10);
    let w = vec![0.4, -0.2, 0.1, 0.0, 1.0];
    let s = TrainerState::at(w.clone(), 4).tap_k(3);
    let (next, info) = modelmix_step(&s, &p, &c).unwrap();
    let mut streams = modelmix::optimizer::StepStreams::new(4, 3);
    let batch = poisson_sample(p.n(), c.q, &mut streams.sampling);
    let g = clipped_gradient(&p, &w, &batch, &c);
    assert_eq!(info.batch_size, batch.len());
    for j in 0..5 {
        assert!((next.w_curr[j] - (w[j] - c.eta * g[j])).abs() < 1e-15);
    }
    assert_eq!(next.w_prev, w);
    assert_eq!(next.k, 4);
}

trait TapK {
    fn tap_k(self, k: u64) -> Self;
}
impl TapK for TrainerState<f64> {
    fn tap_k(mut self, k: u64) -> Self {
        self.k = k;
        self
    }
}

fn assert_reduction<P: Problem<f64>>(p: &P, sigma: f64, c: f64) {
    let mut mix = cfg(0.05, c, 0.0, 0.2, sigma, 200);
    mix.alpha = AlphaMode::Fixed(1.0);
    let start = TrainerState::at(p.initial_point(), 17);
    let opts = TrainOptions {
        output: OutputMode::FullTrajectory,
        log_every: 0,
    };
    let a = train(p, start.clone(), &mix, Method::Modelmix, &opts).unwrap();
    let b = train(p, start, &mix, Method::Dpsgd, &opts).unwrap();
    let (ta, tb) = (a.trajectory.unwrap(), b.trajectory.unwrap());
    for (x, y) in ta.iter().zip(&tb) {
        assert!(
            x.iter().zip(y).all(|(u, v)| u.to_bits() == v.to_bits()),
            "{}",
            p.name()
        );
    }
    assert_eq!(a.trajectory_hash, b.trajectory_hash);
}

#[test]
fn disabled_mixing_is_bit_identical_to_dpsgd() {
    assert_reduction(&make_least_squares::<f64>(300, 6, 1).unwrap(), 0.5, 1.0);
    assert_reduction(&make_logistic::<f64>(300, 6, 2).unwrap(), 0.5, 1.0);
    assert_reduction(&make_mlp::<f64>(&[4, 8, 1], 300, 3).unwrap(), 0.5, 1.0);
}

#[test]
fn mixed_point_is_the_midpoint_on_average_and_stays_in_range() {
    let p = identity_quadratic(3);
    let c = cfg(0.1, 1.0, 0.0, 0.0, 0.0, 1);
    let a = vec![1.0, -2.0, 0.5];
    let b = vec![3.0, 2.0, 0.5];
    let draws = 100_000;
    let mut sum = [0.0; 3];
    for k in 0..draws {
        let s = TrainerState {
            w_curr: a.clone(),
            w_prev: b.clone(),
            k,
            seed: 8,
        };
        let (next, _) = modelmix_step(&s, &p, &c).unwrap();
        for j in 0..3 {
            let lo = a[j].min(b[j]);
            let hi = a[j].max(b[j]);
            assert!(next.w_curr[j] >= lo && next.w_curr[j] <= hi);
            sum[j] += next.w_curr[j];
        }
    }
    for j in 0..3 {
        let mean = sum[j] / draws as f64;
        let se = (a[j] - b[j]).abs() / 12f64.sqrt() / (draws as f64).sqrt();
        let mid = 0.5 * (a[j] + b[j]);
        assert!(
            (mean - mid).abs() <= 3.0 * se.max(1e-15),
            "coord {j}: {mean} vs {mid}"
        );
    }
}

#[test]
fn separation_postcondition() {
    let tau = 0.3_f64;
    let mut a = vec![0.0_f64, 1.0, 2.0, -1.0, 5.0];
    let mut b = vec![0.0, 1.1, 1.95, -0.71, 4.0];
    enforce_separation(&mut a, &mut b, tau);
    for j in 0..5 {
        assert!((a[j] - b[j]).abs() >= tau - 1e-12);
    }
    assert_eq!((a[0], b[0]), (0.15, -0.15));
    assert_eq!((a[4], b[4]), (5.0, 4.0));

    let p = make_least_squares::<f64>(100, 4, 2).unwrap();
    let c = cfg(0.01, 1.0, tau, 0.1, 0.2, 50);
    let mut s = TrainerState::at(vec![0.0; 4], 3);
    for _ in 0..50 {
        let (next, info) = modelmix_step(&s, &p, &c).unwrap();
        assert!(info.min_coord_gap >= tau - 1e-12);
        s = next;
    }
}

#[test]
fn seeded_runs_are_bit_identical() {
    let p = make_logistic::<f64>(200, 5, 5).unwrap();
    let c = cfg(0.05, 1.0, 0.02, 0.1, 0.3, 100);
    let start = TrainerState::at(vec![0.0; 5], 6);
    let opts = TrainOptions::default();
    let a = train(&p, start.clone(), &c, Method::Modelmix, &opts).unwrap();
    let b = train(&p, start.clone(), &c, Method::Modelmix, &opts).unwrap();
    assert_eq!(a, b);
    let other = train(
        &p,
        TrainerState::at(vec![0.0; 5], 7),
        &c,
        Method::Modelmix,
        &opts,
    )
    .unwrap();
    assert_ne!(a.trajectory_hash, other.trajectory_hash);
}

#[test]
fn dpsgd_special_cases() {
    let p = make_least_squares::<f64>(100, 3, 4).unwrap();
    let w = vec![0.5, 0.5, 0.5];
    let c = cfg(0.001, 1e12, 0.0, 1.0, 0.0, 1);
    let (next, info) = dpsgd_step(&TrainerState::at(w.clone(), 0), &p, &c).unwrap();
    assert_eq!(info.batch_size, 100);
    let mut g = vec![0.0; 3];
    p.full_grad(&w, &mut g);
    for j in 0..3 {
        let gd = w[j] - c.eta * 100.0 * g[j];
        assert!((next.w_curr[j] - gd).abs() < 1e-12);
    }

    let tiny = cfg(0.001, 1e-3, 0.0, 1.0, 0.0, 1);
    for i in 0..p.n() {
        let gi = clipped_gradient(&p, &w, &[i], &tiny);
        assert!((norm2(&gi) - 1e-3).abs() < 1e-15);
    }
}

#[test]
fn sgd_contracts_on_isotropic_quadratic() {
    let p = identity_quadratic(4);
    let mut s = TrainerState::at(vec![1.0, -2.0, 3.0, 0.5], 0);
    for _ in 0..10 {
        let before = norm2(&s.w_curr);
        s = sgd_step(&s, &p, 0.3, 1.0).unwrap().0;
        assert!((norm2(&s.w_curr) - 0.7 * before).abs() < 1e-14);
    }
}

#[test]
fn sgd_reaches_normal_equation_optimum() {
    let p = make_least_squares::<f64>(300, 8, 5).unwrap();
    let opt = p.meta().optimum.clone().unwrap();
    let eta = 1.0 / (p.n() as f64 * p.meta().beta.unwrap());
    let mut s = TrainerState::at(vec![0.0; 8], 0);
    for _ in 0..1000 {
        s = sgd_step(&s, &p, eta, 1.0).unwrap().0;
    }
    let diff: Vec<f64> = s.w_curr.iter().zip(&opt).map(|(a, b)| a - b).collect();
    assert!(norm2(&diff) < 1e-6);

    let e = example_31::<f64>();
    let fixed = sgd_step(&TrainerState::at(vec![20.0], 0), &e, 0.1, 1.0)
        .unwrap()
        .0;
    assert_eq!(fixed.w_curr, vec![20.0]);
}

#[test]
fn strawman_first_substep_is_gradient_descent_and_noise_splits_models() {
    let p = make_least_squares::<f64>(100, 4, 9).unwrap();
    let mut c = cfg(0.002, 1e12, 0.0, 1.0, 0.0, 200);
    let w = vec![0.2; 4];
    let a = TrainerState::at(w.clone(), 1);
    let (a1, _) = strawman_alternating_step(&a, &a.clone(), &p, &c).unwrap();
    let mut g = vec![0.0; 4];
    p.full_grad(&w, &mut g);
    for j in 0..4 {
        assert!((a1.w_curr[j] - (w[j] - c.eta * 100.0 * g[j])).abs() < 1e-13);
    }

    let opts = TrainOptions::default();
    let out = train(&p, a.clone(), &c, Method::Strawman, &opts).unwrap();
    let gap = p.loss(&out.final_state.w_curr) - p.optimal_loss().unwrap();
    assert!(gap < 1e-3 * p.loss(&w), "{gap}");

    c.sigma = 0.1;
    let (mut x, mut y) = (a.clone(), a);
    for _ in 0..10 {
        (x, y) = strawman_alternating_step(&x, &y, &p, &c).unwrap();
    }
    let diff: Vec<f64> = x.w_curr.iter().zip(&y.w_curr).map(|(u, v)| u - v).collect();
    assert!(norm2(&diff) > 0.0);
}

#[test]
fn dimension_mismatch_is_a_contract_error() {
    let p = make_least_squares::<f64>(20, 3, 1).unwrap();
    let c = cfg(0.1, 1.0, 0.0, 0.5, 0.0, 1);
    let s = TrainerState::at(vec![0.0; 2], 0);
    assert!(matches!(modelmix_step(&s, &p, &c), Err(Error::Contract(_))));
    assert!(matches!(dpsgd_step(&s, &p, &c), Err(Error::Contract(_))));
    assert!(matches!(
        sgd_step(&s, &p, 0.1, 0.5),
        Err(Error::Contract(_))
    ));
    assert!(matches!(
        strawman_alternating_step(&s, &s, &p, &c),
        Err(Error::Contract(_))
    ));
    assert!(TrainerState::new(vec![0.0; 2], vec![0.0; 3], 0).is_err());
}

#[test]
fn config_validation_and_tau_schedule() {
    let mut c = cfg(0.1, 1.0, 0.0, 0.5, 0.0, 10);
    assert!(c.validate().is_ok());
    c.q = 1.5;
    assert!(c.validate().is_err());
    let pw = TauSchedule::Piecewise(vec![(0.5, 0.05), (1.0, 0.025)]);
    assert!(pw.validate().is_ok());
    assert_eq!(pw.tau_at(0, 100), 0.05);
    assert_eq!(pw.tau_at(49, 100), 0.05);
    assert_eq!(pw.tau_at(50, 100), 0.025);
    assert_eq!(pw.min_tau(), 0.025);
    assert!(TauSchedule::Piecewise(vec![(0.5, 0.05)])
        .validate()
        .is_err());
    assert!(
        TauSchedule::Piecewise(vec![(0.6, 0.05), (0.5, 0.1), (1.0, 0.0)])
            .validate()
            .is_err()
    );
    assert!(TauSchedule::Constant(-1.0).validate().is_err());
}

#[test]
fn accountant_handshake_round_trips() {
    let mut c = cfg(0.5, 4.0, 0.1, 0.02, 1.3, 500);
    c.clip = ClipConfig::new(4.0, 25).unwrap();
    let acc = c.accountant_config(1000, 1e-5).unwrap();
    assert_eq!(
        (acc.q, acc.sigma, acc.sensitivity, acc.p, acc.tau, acc.eta),
        (0.02, 1.3, 4.0, 25, 0.1, 0.5)
    );
    assert_eq!((acc.iterations, acc.delta), (500, 1e-5));
    let json = serde_json::to_string(&acc).unwrap();
    let back: AccountantConfig = serde_json::from_str(&json).unwrap();
    assert_eq!(back, acc);
    c.aggregation = Aggregation::Mean;
    assert!((c.accountant_config(1000, 1e-5).unwrap().sensitivity - 0.2).abs() < 1e-15);
}

#[test]
fn train_outputs_and_files() {
    let p = make_least_squares::<f64>(100, 3, 2).unwrap();
    let c = cfg(0.01, 2.0, 0.01, 0.2, 0.1, 20);
    let opts = TrainOptions {
        output: OutputMode::FullTrajectory,
        log_every: 5,
    };
    let out = train(
        &p,
        TrainerState::at(vec![0.0; 3], 1),
        &c,
        Method::Modelmix,
        &opts,
    )
    .unwrap();
    let traj = out.trajectory.clone().unwrap();
    assert_eq!(traj.len(), 20);
    assert_eq!(traj.last().unwrap(), &out.final_state.w_curr);
    assert_eq!(
        out.log.iter().map(|r| r.k).collect::<Vec<_>>(),
        vec![5, 10, 15, 20]
    );

    let final_only = train(
        &p,
        TrainerState::at(vec![0.0; 3], 1),
        &c,
        Method::Modelmix,
        &TrainOptions::default(),
    )
    .unwrap();
    assert!(final_only.trajectory.is_none());
    assert_eq!(final_only.trajectory_hash, out.trajectory_hash);
    assert_eq!(final_only.log.len(), 20);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.bin");
    write_checkpoint(&path, &out.final_state.w_curr).unwrap();
    assert_eq!(std::fs::metadata(&path).unwrap().len(), 8 + 3 * 8);
    assert_eq!(
        read_checkpoint::<f64>(&path).unwrap(),
        out.final_state.w_curr
    );
    std::fs::write(&path, [1u8, 0, 0, 0, 0, 0, 0, 0]).unwrap();
    assert!(read_checkpoint::<f64>(&path).is_err());

    let mut buf = Vec::new();
    write_ndjson(&mut buf, &out.log).unwrap();
    let lines: Vec<LogRecord> = String::from_utf8(buf)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines, out.log);
}

#[test]
fn single_precision_runs() {
    let p = make_least_squares::<f32>(100, 3, 2).unwrap();
    let c = MixConfig::<f32> {
        eta: 0.001,
        clip: ClipConfig::l2(5.0),
        tau: TauSchedule::Constant(0.001),
        q: 0.5,
        sigma: 0.0,
        iterations: 300,
        seed: 1,
        aggregation: Aggregation::Sum,
        alpha: AlphaMode::Uniform,
    };
    let out = train(
        &p,
        TrainerState::at(vec![0.0f32; 3], 1),
        &c,
        Method::Modelmix,
        &TrainOptions::default(),
    )
    .unwrap();
    assert!(p.loss(&out.final_state.w_curr) < 0.5 * p.loss(&[0.0; 3]));
}
