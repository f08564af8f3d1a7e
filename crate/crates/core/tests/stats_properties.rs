use mixlimit::birkhoff::{NormalizingScheme, Observable};
use mixlimit::dynamics::PhaseSpaceSystem;
use mixlimit::rng::Stream;
use mixlimit::stats::{
    char_fn_estimate, estimate_conditional_dlt, estimate_mixing_dlt, estimate_plain_dlt, ks_distance,
    EmpiricalDistribution, Event, Functional, Interval, ReferenceLaw, Tolerance, Weight,
};
use proptest::prelude::*;

fn bernoulli_sum() -> (Functional, NormalizingScheme) {
    let sys = PhaseSpaceSystem::bernoulli(2);
    let f = Observable::coordinate_symbol(&sys, 0).unwrap();
    (Functional::birkhoff(sys, f).unwrap(), NormalizingScheme::clt(0.5, 0.25).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn ks_distance_is_a_probability(samples in prop::collection::vec(-10.0..10.0f64, 1..200), variance in 0.0..4.0f64) {
        let emp = EmpiricalDistribution::new(samples).unwrap();
        let law = ReferenceLaw::gaussian(variance).unwrap();
        let ks = ks_distance(&emp, &law);
        prop_assert!((0.0..=1.0).contains(&ks));
    }

    #[test]
    fn law_mass_is_additive(variance in 0.01..10.0f64, a in -5.0..5.0f64, w1 in 0.01..3.0f64, w2 in 0.01..3.0f64) {
        let law = ReferenceLaw::gaussian(variance).unwrap();
        let (m, b) = (a + w1, a + w1 + w2);
        let whole = law.mass(&Interval::new(a, b).unwrap()).unwrap();
        let left = law.mass(&Interval::new(a, m).unwrap()).unwrap();
        let right = law.mass(&Interval::new(m, b).unwrap()).unwrap();
        prop_assert!((whole - left - right).abs() <= 1e-12);
        prop_assert_eq!(law.mass(&Interval::whole_line()).unwrap(), 1.0);
    }
}

#[test]
fn ks_vanishes_only_on_matching_laws() {
    let zeros = EmpiricalDistribution::new(vec![0.0; 50]).unwrap();
    assert_eq!(ks_distance(&zeros, &ReferenceLaw::DiracAtZero), 0.0);
    let shifted = EmpiricalDistribution::new(vec![1e-9; 50]).unwrap();
    assert!(ks_distance(&shifted, &ReferenceLaw::DiracAtZero) > 0.0);
    let gauss = ReferenceLaw::gaussian(1.0).unwrap();
    assert!(ks_distance(&zeros, &gauss) > 0.0);
}

#[test]
fn standard_errors_shrink_like_root_n() {
    let (func, scheme) = bernoulli_sum();
    let sys = func.system().clone();
    let a = Event::shift_cylinder(&sys, 0, vec![1]).unwrap();
    let b = Event::shift_cylinder(&sys, 0, vec![0]).unwrap();
    let interval = Interval::new(-0.5, 1.0).unwrap();
    let tol = Tolerance::default();
    let stream = Stream::from_seed(11);
    let (small, large) = (1_000, 16_000);
    let ratio = |x: f64, y: f64| {
        let r = x / y;
        assert!((3.6..=4.4).contains(&r), "SE ratio {r}");
    };

    let plain = |n_samples| estimate_plain_dlt(&func, &scheme, &[64], n_samples, Some(interval), tol, &stream).unwrap();
    let (p1, p2) = (plain(small), plain(large));
    ratio(p1.ks[0].std_error, p2.ks[0].std_error);
    ratio(p1.interval[0].std_error, p2.interval[0].std_error);

    let cond =
        |n_samples| estimate_conditional_dlt(&func, &scheme, &a, interval, 64, n_samples, tol, &stream).unwrap().0;
    ratio(cond(small).std_error, cond(large).std_error);

    let mix = |n_samples| estimate_mixing_dlt(&func, &scheme, &a, &b, interval, 64, n_samples, tol, &stream).unwrap().0;
    ratio(mix(small).std_error, mix(large).std_error);

    let weight = Weight::Event(a.clone());
    let cf = |n_samples| char_fn_estimate(&func, &scheme, 1.3, &weight, 64, n_samples, tol, &stream).unwrap().report;
    ratio(cf(small).std_error, cf(large).std_error);
}

#[test]
fn full_space_events_reduce_to_the_plain_estimator() {
    let (func, scheme) = bernoulli_sum();
    let interval = Interval::new(-1.0, 0.7).unwrap();
    let full = Event::full_space();
    let stream = Stream::from_seed(12);
    let tol = Tolerance::default();
    let plain = estimate_plain_dlt(&func, &scheme, &[100], 2000, Some(interval), tol, &stream).unwrap();
    let (cond, cond_samples) =
        estimate_conditional_dlt(&func, &scheme, &full, interval, 100, 2000, tol, &stream).unwrap();
    let (mix, mix_samples) =
        estimate_mixing_dlt(&func, &scheme, &full, &full, interval, 100, 2000, tol, &stream).unwrap();
    assert_eq!(cond_samples, plain.samples);
    assert_eq!(mix_samples, plain.samples);
    for r in [&cond, &mix] {
        assert_eq!(r.estimate, plain.interval[0].estimate);
        assert_eq!(r.target, plain.interval[0].target);
        assert_eq!(r.std_error, plain.interval[0].std_error);
    }
}

#[test]
fn char_fn_at_zero_is_the_weight_mean() {
    let (func, scheme) = bernoulli_sum();
    let sys = func.system().clone();
    let stream = Stream::from_seed(13);
    let a = Event::shift_cylinder(&sys, 3, vec![1, 1]).unwrap();
    let f = Observable::coordinate_symbol(&sys, 5).unwrap();
    for weight in [Weight::Event(a.clone()), Weight::Observable(f.clone())] {
        let cf = char_fn_estimate(&func, &scheme, 0.0, &weight, 50, 1000, Tolerance::default(), &stream).unwrap();
        // mu-hat(phi) recomputed from the same substreams.
        let direct: f64 = (0..1000u64)
            .map(|i| {
                let x = sys.sample_measure(&mut stream.substream(i));
                let end = sys.apply_map(&x, 50).unwrap();
                match &weight {
                    Weight::Event(e) => e.contains(&sys, &end, None) as u8 as f64,
                    Weight::Observable(g) => g.eval(&sys, &end),
                }
            })
            .sum::<f64>()
            / 1000.0;
        assert_eq!(cf.estimate_im, 0.0);
        assert!((cf.estimate_re - direct).abs() <= 1e-15, "{} vs {direct}", cf.estimate_re);
    }
}
