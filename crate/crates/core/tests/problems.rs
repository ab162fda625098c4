use modelmix::problems::{
    estimate_kappa, estimate_kappa_with, example_31, expected_clipped_gradient,
    expected_clipped_gradient_exact, finite_difference_error, fit_tail_constant,
    make_least_squares, make_logistic, make_mlp, recommend_clip_threshold, thm31_bound,
    thm32_metric_and_bound, Dataset, Logistic, Problem, Thm31Params, Thm32Params,
};
use modelmix::scalar::norm2;
use modelmix::Error;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

fn random_point(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d)
        .map(|_| scale * (2.0 * rng.random::<f64>() - 1.0))
        .collect()
}

fn probes<P: Problem<f64>>(p: &P, seed: u64) -> Vec<(Vec<f64>, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..10)
        .map(|_| {
            (
                random_point(&mut rng, p.dim(), 1.0),
                rng.random_range(0..p.n()),
            )
        })
        .collect()
}

fn mean_of_per_sample<P: Problem<f64>>(p: &P, w: &[f64]) -> Vec<f64> {
    let mut acc = vec![0.0; p.dim()];
    for i in 0..p.n() {
        for (a, g) in acc.iter_mut().zip(p.per_sample_grad(w, i)) {
            *a += g;
        }
    }
    acc.iter().map(|a| a / p.n() as f64).collect()
}

fn check_mean_identity<P: Problem<f64>>(p: &P, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..5 {
        let w = random_point(&mut rng, p.dim(), 1.0);
        let mut full = vec![0.0; p.dim()];
        p.full_grad(&w, &mut full);
        let mean = mean_of_per_sample(p, &w);
        let diff: Vec<f64> = full.iter().zip(&mean).map(|(a, b)| a - b).collect();
        assert!(
            norm2(&diff) <= 1e-10 * norm2(&mean).max(1e-12),
            "{}",
            p.name()
        );
    }
}

fn check_convexity<P: Problem<f64>>(p: &P, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..100 {
        let a = random_point(&mut rng, p.dim(), 3.0);
        let b = random_point(&mut rng, p.dim(), 3.0);
        let t: f64 = rng.random();
        let mid: Vec<f64> = a
            .iter()
            .zip(&b)
            .map(|(x, y)| t * x + (1.0 - t) * y)
            .collect();
        let chord = t * p.loss(&a) + (1.0 - t) * p.loss(&b);
        assert!(
            p.loss(&mid) <= chord + 1e-10 * chord.abs().max(1.0),
            "{}",
            p.name()
        );
    }
}

fn check_smoothness<P: Problem<f64>>(p: &P, seed: u64) {
    let beta = p.meta().beta.expect("beta");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut ga, mut gb) = (vec![0.0; p.dim()], vec![0.0; p.dim()]);
    for _ in 0..100 {
        let a = random_point(&mut rng, p.dim(), 3.0);
        let b = random_point(&mut rng, p.dim(), 3.0);
        p.full_grad(&a, &mut ga);
        p.full_grad(&b, &mut gb);
        let dg: Vec<f64> = ga.iter().zip(&gb).map(|(x, y)| x - y).collect();
        let dw: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        assert!(
            norm2(&dg) <= beta * norm2(&dw) * (1.0 + 1e-10),
            "{}",
            p.name()
        );
    }
}

#[test]
fn least_squares_optimum_and_witnesses() {
    let p = make_least_squares::<f64>(300, 8, 5).unwrap();
    let opt = p.meta().optimum.clone().unwrap();
    let mut g = vec![0.0; 8];
    p.full_grad(&opt, &mut g);
    assert!(norm2(&g) < 1e-9);
    assert!(finite_difference_error(&p, &probes(&p, 1), 1e-6) < 1e-5);
    check_mean_identity(&p, 2);
    check_convexity(&p, 3);
    check_smoothness(&p, 4);
    let lam = p.data().second_moment_lambda_max();
    assert_eq!(p.meta().beta, Some(lam));
}

#[test]
fn logistic_witnesses() {
    let p = make_logistic::<f64>(400, 6, 9).unwrap();
    assert!(finite_difference_error(&p, &probes(&p, 11), 1e-6) < 1e-5);
    check_mean_identity(&p, 12);
    check_convexity(&p, 13);
    check_smoothness(&p, 14);
    assert!((p.meta().beta.unwrap() - p.data().second_moment_lambda_max() / 4.0).abs() < 1e-15);
}

#[test]
fn logistic_separable_pair_descends() {
    let data = Dataset::new(2, 2, vec![1.0, 0.5, -1.0, -0.5], vec![1.0, -1.0]).unwrap();
    let p = Logistic::from_data(data).unwrap();
    let mut w = vec![0.0, 0.0];
    let mut g = vec![0.0; 2];
    let mut prev = p.loss(&w);
    for _ in 0..50 {
        p.full_grad(&w, &mut g);
        for (x, d) in w.iter_mut().zip(&g) {
            *x -= 0.5 * d;
        }
        let cur = p.loss(&w);
        assert!(cur < prev);
        prev = cur;
    }
}

#[test]
fn mlp_gradients_match_finite_differences() {
    let p = make_mlp::<f64>(&[4, 6, 5, 1], 50, 21).unwrap();
    assert_eq!(p.dim(), 4 * 6 + 6 + 6 * 5 + 5 + 5 + 1);
    assert!(p.meta().beta.is_none());
    assert!(finite_difference_error(&p, &probes(&p, 22), 1e-6) < 1e-5);
    check_mean_identity(&p, 23);
    assert!(make_mlp::<f64>(&[3, 2], 10, 0).is_err());
}

#[test]
fn problems_are_seed_reproducible() {
    let a = make_least_squares::<f64>(50, 3, 7).unwrap();
    let b = make_least_squares::<f64>(50, 3, 7).unwrap();
    let c = make_least_squares::<f64>(50, 3, 8).unwrap();
    assert_eq!(a.data(), b.data());
    assert_ne!(a.data(), c.data());
}

#[test]
fn snapshot_round_trip() {
    let p = make_logistic::<f64>(20, 3, 4).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("logistic.snap");
    p.data().write_snapshot(&path, "logistic", 4).unwrap();
    let (header, data) = Dataset::<f64>::read_snapshot(&path).unwrap();
    assert_eq!(
        (header.n, header.d, header.family.as_str(), header.seed),
        (20, 3, "logistic", 4)
    );
    assert_eq!(&data, p.data());
}

#[test]
fn example31_facts() {
    let p = example_31::<f64>();
    let mut g = [0.0];
    p.full_grad(&[20.0], &mut g);
    assert_eq!(g[0], 0.0);
    p.full_grad(&[0.0], &mut g);
    assert_eq!(g[0], -20.0);

    let third = Ratio::new(1, 3);
    assert_eq!(
        expected_clipped_gradient_exact(Ratio::from_integer(20), Ratio::from_integer(1)),
        third
    );
    assert_eq!(
        expected_clipped_gradient_exact(Ratio::from_integer(0), Ratio::from_integer(1)),
        third
    );
    assert_eq!(
        expected_clipped_gradient_exact(Ratio::from_integer(20), Ratio::from_integer(100)),
        Ratio::from_integer(0)
    );
    assert!((expected_clipped_gradient(&p, &[20.0], 1.0)[0] - 1.0 / 3.0).abs() <= 1e-12);
    assert!((expected_clipped_gradient(&p, &[0.0], 1.0)[0] - 1.0 / 3.0).abs() <= 1e-12);
    assert_eq!(expected_clipped_gradient(&p, &[20.0], 100.0)[0], 0.0);

    for w in [-50.0, 0.0, 20.0, 73.0] {
        let stats = estimate_kappa(&p, &[w], 1000, 0).unwrap();
        assert!(
            (stats.sampling_noise_std - 49.67).abs() < 0.05,
            "{}",
            stats.sampling_noise_std
        );
        assert_eq!(stats.draws, 3);
    }
}

#[test]
fn kappa_fit_recovers_exponential_scale() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let dist = Exp::new(0.5).unwrap();
    let draws: Vec<f64> = (0..100_000).map(|_| dist.sample(&mut rng)).collect();
    let k = fit_tail_constant(&draws, 0.5).unwrap();
    assert!((1.8..=2.2).contains(&k), "{k}");
}

#[test]
fn kappa_degenerate_and_contract_errors() {
    let collinear = Dataset::new(3, 2, vec![1.0, 2.0, 2.0, 4.0, 3.0, 6.0], vec![1.0; 3]).unwrap();
    let p = modelmix::problems::LeastSquares::from_data(
        Dataset::new(4, 1, vec![1.0, 2.0, 3.0, 4.0], vec![1.0, 2.0, 3.0, 4.0]).unwrap(),
    )
    .unwrap();
    assert!(matches!(
        estimate_kappa(&p, &[1.0], 1000, 0),
        Err(Error::Degenerate(_))
    ));
    assert!(matches!(
        estimate_kappa(&p, &[1.0], 999, 0),
        Err(Error::Contract(_))
    ));
    assert!(matches!(
        fit_tail_constant(&[0.0; 10], 0.5),
        Err(Error::Degenerate(_))
    ));
    assert!(modelmix::problems::LeastSquares::from_data(collinear).is_err());
}

#[test]
fn kappa_sampling_is_seeded() {
    let p = make_least_squares::<f64>(5000, 4, 1).unwrap();
    let w = vec![0.3; 4];
    let a = estimate_kappa_with(&p, &w, 2000, 5, 0.5).unwrap();
    let b = estimate_kappa_with(&p, &w, 2000, 5, 0.5).unwrap();
    assert_eq!(a, b);
    assert!(a.kappa_hat > 0.0 && a.draws == 2000);
}

#[test]
fn clip_threshold_rule() {
    let c = recommend_clip_threshold(2.0, 1e4, 10.0, 1.0, 1e-5, 1.0).unwrap();
    assert!((c - 8.0 * 10f64.ln()).abs() < 1e-12);
    assert!((c - 18.42).abs() < 0.005);
    let mut last = 0.0;
    for k in [1.0, 1.5, 2.0, 4.0, 8.0] {
        let v = recommend_clip_threshold(k, 1e4, 10.0, 1.0, 1e-5, 1.0).unwrap();
        assert!(v >= last);
        last = v;
    }
    // κ < 1 with a tiny privacy budget makes the second term dominate
    let small = recommend_clip_threshold(0.1, 10.0, 1e4, 0.01, 1e-5, 1.0).unwrap();
    let second = -0.1 * 0.1f64.ln() * ((1e4 * 1e5f64.ln()).sqrt() / 0.1).ln();
    assert!((small - second).abs() < 1e-12 && second > 0.4 * 10f64.ln());
    assert!(recommend_clip_threshold(0.0, 1.0, 1.0, 1.0, 0.5, 1.0).is_err());
}

#[test]
fn thm31_bound_scales_with_root_t() {
    let params = |t: usize| Thm31Params {
        w0: 2.0,
        lipschitz: Some(3.0),
        beta: Some(1.5),
        gamma: 0.5,
        q: 0.1,
        n: 1000.0,
        d: 10.0,
        noise_sq_mean: 4.0,
        noise_mean: 2.0,
        taus: vec![0.3 / (t as f64).sqrt(); t],
    };
    let ratio = thm31_bound(&params(10_000)).unwrap() / thm31_bound(&params(40_000)).unwrap();
    assert!((ratio - 2.0).abs() < 0.1, "{ratio}");
    let mut missing = params(10);
    missing.beta = None;
    assert!(matches!(thm31_bound(&missing), Err(Error::Contract(_))));
}

#[test]
fn thm32_zero_gradient_metric() {
    let p = Thm32Params {
        c: 1.0,
        beta: Some(1.0),
        d: 5.0,
        n: 100.0,
        q: 0.1,
        eps: 1.0,
        delta: 1e-5,
        r_f: 1.0,
        w0_tilde: 0.0,
        v: 1.0,
        taus: vec![0.0; 10],
    };
    let (metric, bound) = thm32_metric_and_bound(&[0.0; 10], &p).unwrap();
    assert_eq!(metric, 0.0);
    assert!(bound > 0.0);
}
