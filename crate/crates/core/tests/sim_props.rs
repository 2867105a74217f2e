use hsst::cutoff::{cutoff_schedule, finite_chebyshev};
use hsst::dual_sim::{
    empirical_survival, ks_distance, simulate_coupled_tau, simulate_tau, summarize, survival_from_samples, SimConfig,
};
use hsst::moments::{mean_closed_form, variance_quadrature};
use hsst::{Error, Family, ManifoldSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cfg(f: Family, n: u32, dt: f64, seed: u64, paths: u64) -> SimConfig {
    SimConfig::new(ManifoldSpec::new(f, n).unwrap(), dt, 1e-2, seed, paths).unwrap()
}

#[test]
fn identical_across_pool_sizes() {
    let c = cfg(Family::ComplexProjective, 3, 1e-4, 5, 700);
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| simulate_tau(&c).unwrap())
    };
    let a = run(1);
    let b = run(4);
    assert_eq!(a.samples, b.samples);
    assert_eq!(a.steps, b.steps);
    let a = pool_coupled(1, &c);
    let b = pool_coupled(3, &c);
    assert_eq!(a, b);
}

fn pool_coupled(threads: usize, c: &SimConfig) -> Vec<f64> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| simulate_coupled_tau(c).unwrap().samples)
}

#[test]
fn seeds_give_different_streams() {
    let a = simulate_tau(&cfg(Family::Sphere, 4, 1e-4, 1, 64)).unwrap();
    let b = simulate_tau(&cfg(Family::Sphere, 4, 1e-4, 2, 64)).unwrap();
    assert_ne!(a.samples, b.samples);
}

#[test]
fn samples_are_positive_and_finite() {
    for f in Family::ALL {
        let b = simulate_tau(&cfg(f, 3, 1e-4, 3, 200)).unwrap();
        assert_eq!(b.samples.len(), 200);
        assert!(b.samples.iter().all(|t| t.is_finite() && *t > 0.0));
        assert!(b.max_drift_ratio.iter().all(|r| *r <= 0.5 + 1e-12));
        assert!(b.max_containment_violation.is_none());
    }
}

#[test]
fn mean_matches_closed_form() {
    let c = cfg(Family::ComplexProjective, 4, 1e-4, 21, 4000);
    let s = simulate_tau(&c).unwrap().summary();
    let z = (s.mean - mean_closed_form(c.spec)) / s.mean_se;
    assert!(z.abs() < 4.0, "z = {z}");
}

#[test]
fn step_budget_is_enforced() {
    let c = cfg(Family::Sphere, 3, 1e-5, 1, 16).with_step_budget(10);
    match simulate_tau(&c) {
        Err(Error::StepBudget { budget, .. }) => assert_eq!(budget, 10),
        other => panic!("expected a step budget error, got {other:?}"),
    }
    assert!(matches!(simulate_coupled_tau(&c), Err(Error::StepBudget { .. })));
}

#[test]
fn coupled_stays_contained() {
    let c = cfg(Family::Sphere, 5, 1e-4, 31, 500);
    let b = simulate_coupled_tau(&c).unwrap();
    let v = b.max_containment_violation.unwrap();
    assert!(v <= 3.0 * c.dt.sqrt(), "{v}");
}

#[test]
fn time_step_bias_shrinks() {
    // same seed at dt, dt/2, dt/4: the mean moves toward the exact value
    let spec = ManifoldSpec::sphere(5).unwrap();
    let exact = mean_closed_form(spec);
    let mut prev = f64::INFINITY;
    for dt in [4e-4, 1e-4, 2.5e-5] {
        let s = simulate_tau(&cfg(Family::Sphere, 5, dt, 41, 4000)).unwrap().summary();
        let bias = (s.mean - exact).abs();
        assert!(bias <= prev + 3.0 * s.mean_se, "dt {dt}: bias {bias}, previous {prev}");
        prev = bias;
    }
    assert!(prev < 4.0 * (variance_quadrature(spec, 1e-10).unwrap().variance.unwrap() / 4000.0).sqrt());
}

#[test]
fn start_offset_barely_matters() {
    let spec = ManifoldSpec::sphere(6).unwrap();
    let a = simulate_tau(&SimConfig::new(spec, 1e-4, 2e-2, 51, 4000).unwrap()).unwrap();
    let b = simulate_tau(&SimConfig::new(spec, 1e-4, 5e-3, 52, 4000).unwrap()).unwrap();
    let ks = ks_distance(&a.samples, &b.samples).unwrap();
    assert!(ks.p_value > 1e-3, "{ks:?}");
}

#[test]
fn survival_inside_finite_envelope() {
    for f in Family::ALL {
        let c = cfg(f, 20, 1e-4, 61, 2000);
        let q = variance_quadrature(c.spec, 1e-10).unwrap();
        let batch = simulate_tau(&c).unwrap();
        let sched = cutoff_schedule(c.spec);
        let grid: Vec<f64> = [-2.0, 0.0, 2.0, 4.0].iter().map(|&x| sched.time(x)).collect();
        for p in empirical_survival(&batch, &grid).unwrap() {
            let e = finite_chebyshev(q.mean, q.variance.unwrap(), p.t);
            let se = p.se.max(1.0 / 2000.0);
            assert!(p.p <= e.upper + 3.0 * se && p.p >= e.lower - 3.0 * se, "{f:?} at {}: {}", p.t, p.p);
        }
    }
}

#[test]
fn ks_calibration() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut rejections = 0;
    for _ in 0..200 {
        let a: Vec<f64> = (0..300).map(|_| rng.random()).collect();
        let b: Vec<f64> = (0..300).map(|_| rng.random()).collect();
        if ks_distance(&a, &b).unwrap().p_value < 0.05 {
            rejections += 1;
        }
    }
    // about 10 expected
    assert!((2..=22).contains(&rejections), "{rejections}");
    let a: Vec<f64> = (0..2000).map(|_| rng.random()).collect();
    let b: Vec<f64> = (0..2000).map(|_| rng.random::<f64>() + 0.2).collect();
    assert!(ks_distance(&a, &b).unwrap().p_value < 1e-6);
}

#[test]
fn summary_of_known_sample() {
    let s = summarize(&[1.0, 2.0, 3.0, 4.0]);
    assert_eq!(s.count, 4);
    assert!((s.mean - 2.5).abs() < 1e-15);
    assert!((s.variance - 5.0 / 3.0).abs() < 1e-12);
    assert!((s.mean_se - (5.0f64 / 12.0).sqrt()).abs() < 1e-12);
}

#[test]
fn survival_rejects_empty() {
    assert!(survival_from_samples(&[], &[1.0]).is_err());
    assert!(ks_distance(&[], &[1.0]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn survival_is_monotone(xs in prop::collection::vec(0.0f64..10.0, 1..200), mut ts in prop::collection::vec(-1.0f64..11.0, 1..20)) {
        ts.sort_by(f64::total_cmp);
        let s = survival_from_samples(&xs, &ts).unwrap();
        for w in s.windows(2) {
            prop_assert!(w[1].p <= w[0].p);
        }
        prop_assert!(s.iter().all(|p| (0.0..=1.0).contains(&p.p)));
        let mut sorted = xs.clone();
        sorted.sort_by(f64::total_cmp);
        let below = survival_from_samples(&xs, &[sorted[0] - 1.0]).unwrap()[0].p;
        let above = survival_from_samples(&xs, &[sorted[sorted.len() - 1]]).unwrap()[0].p;
        prop_assert_eq!(below, 1.0);
        prop_assert_eq!(above, 0.0);
    }

    #[test]
    fn ks_self_distance_is_zero(xs in prop::collection::vec(-5.0f64..5.0, 1..100)) {
        let r = ks_distance(&xs, &xs).unwrap();
        prop_assert_eq!(r.statistic, 0.0);
        prop_assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn ks_is_symmetric(a in prop::collection::vec(0.0f64..1.0, 1..60), b in prop::collection::vec(0.0f64..1.0, 1..60)) {
        let x = ks_distance(&a, &b).unwrap();
        let y = ks_distance(&b, &a).unwrap();
        prop_assert!((x.statistic - y.statistic).abs() < 1e-15);
        prop_assert!(x.statistic <= 1.0);
    }
}
