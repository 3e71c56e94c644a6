use proptest::prelude::*;
use tailcross::cte::{abs_tail, power_tail};
use tailcross::distributions::{
    log_corrected_pareto_inverse_survival, log_corrected_pareto_survival, GevParams, GpdParams,
    ParetoTail,
};
use tailcross::estimators::estimate;
use tailcross::*;

fn pk(xs: &[f64], k: usize) -> f64 {
    pickands(&sort_descending(xs), k).unwrap().value
}

fn dh(xs: &[f64], k: usize) -> f64 {
    dedh(&sort_descending(xs), k).unwrap().value
}

fn grid() -> impl Iterator<Item = f64> {
    (0..1000).map(|i| 0.9999 * i as f64 / 999.0)
}

#[test]
fn quantile_round_trips() {
    for shape in [-0.7, -0.2, 0.0, 0.3, 1.0, 2.5] {
        let g = GpdParams::new(shape, 1.7).unwrap();
        for p in grid() {
            let back = g.cdf(g.quantile(p).unwrap()).unwrap();
            assert!((back - p).abs() < 1e-9, "gpd {shape} p={p} got {back}");
        }
    }
    for shape in [0.1, 0.5, 1.0, 4.0] {
        let t = ParetoTail::new(shape).unwrap();
        for p in grid() {
            let back = t.cdf(t.quantile(p).unwrap()).unwrap();
            assert!((back - p).abs() < 1e-9, "pareto {shape} p={p} got {back}");
        }
    }
    for shape in [-0.5, 0.0, 0.8] {
        let g = GevParams::new(shape, 2.0, -0.5).unwrap();
        for p in grid().skip(1) {
            let back = g.cdf(g.quantile(p).unwrap()).unwrap();
            assert!((back - p).abs() < 1e-9, "gev {shape} p={p} got {back}");
        }
    }
    for p in grid() {
        let x = log_corrected_pareto_inverse_survival(1.0 - p).unwrap();
        let back = 1.0 - log_corrected_pareto_survival(x);
        assert!((back - p).abs() < 1e-9, "log pareto p={p} got {back}");
    }
}

fn ks_distance(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn ks_distance_shrinks_with_n() {
    let g = GpdParams::new(0.4, 1.0).unwrap();
    let stream = RngStream::new(17, Purpose::User, 0, 0);
    let small = ks_distance(g.sample(&stream, 1_000), |x| g.cdf(x).unwrap());
    let large = ks_distance(g.sample(&stream, 100_000), |x| g.cdf(x).unwrap());
    assert!(large < small, "{large} vs {small}");

    let t = ParetoTail::new(1.5).unwrap();
    let small = ks_distance(t.sample(&stream, 1_000), |x| t.cdf(x).unwrap());
    let large = ks_distance(t.sample(&stream, 100_000), |x| t.cdf(x).unwrap());
    assert!(large < small, "{large} vs {small}");
}

#[test]
fn samples_identical_across_thread_counts() {
    use rayon::prelude::*;
    let g = GpdParams::new(0.2, 1.0).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                (0..8u64)
                    .into_par_iter()
                    .map(|j| g.sample(&RngStream::new(3, Purpose::Samples, j, 0), 500))
                    .collect::<Vec<_>>()
            })
    };
    assert_eq!(run(1), run(4));
}

fn gpd_batch(shape: f64, n: usize, seed: u64) -> Vec<f64> {
    GpdParams::new(shape, 1.0)
        .unwrap()
        .sample(&RngStream::new(seed, Purpose::Samples, 0, 0), n)
}

#[test]
fn estimator_error_shrinks_with_n() {
    for kind in [EstimatorKind::Pickands, EstimatorKind::Dedh] {
        let cfg = EstimatorConfig::new(kind);
        for shape in [-0.5, 0.0, 0.5, 1.0] {
            let mae: Vec<f64> = [10_000, 100_000, 1_000_000]
                .iter()
                .map(|&n| {
                    (0..10)
                        .map(|seed| {
                            (estimate(&gpd_batch(shape, n, seed), &cfg).unwrap().value - shape)
                                .abs()
                        })
                        .sum::<f64>()
                        / 10.0
                })
                .collect();
            assert!(
                mae[0] > mae[1] && mae[1] > mae[2],
                "{kind} shape {shape}: {mae:?}"
            );
        }
    }
}

#[test]
fn pickands_location_shift_is_exact_on_dyadic_samples() {
    // integer-valued samples keep every spacing exact under integer shifts
    let xs: Vec<f64> = (0..200u64)
        .map(|i| ((i * 7919) % 1013) as f64 + (i * i % 31) as f64)
        .collect();
    let base = pk(&xs, 12);
    let shifted: Vec<f64> = xs.iter().map(|x| x - 4096.0).collect();
    assert_eq!(pk(&shifted, 12), base);
}

#[test]
fn power_tail_composes() {
    for xi in [0.1, 0.7, 2.0] {
        for (a, b) in [(2.0, 0.5), (3.0, 1.5), (0.25, 4.0)] {
            let v = TailVerdict::Positive(xi);
            let lhs = power_tail(power_tail(v, a).unwrap(), b).unwrap();
            let rhs = power_tail(v, a * b).unwrap();
            match (lhs, rhs) {
                (TailVerdict::Positive(l), TailVerdict::Positive(r)) => {
                    assert!((l - r).abs() < 1e-12)
                }
                other => panic!("{other:?}"),
            }
        }
    }
    let lo = abs_tail(TailVerdict::Positive(0.2), TailVerdict::Positive(0.4));
    let hi = abs_tail(TailVerdict::Positive(0.2), TailVerdict::Positive(0.9));
    match (lo, hi) {
        (TailVerdict::Positive(l), TailVerdict::Positive(h)) => assert!(l <= h),
        other => panic!("{other:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pickands_location_and_scale_invariant(
        seed in 0u64..1000,
        shift in -50.0f64..50.0,
        scale in 0.01f64..100.0,
    ) {
        let xs = gpd_batch(0.3, 400, seed);
        let k = 20;
        let base = pk(&xs, k);
        let shifted = pk(&xs.iter().map(|x| x + shift).collect::<Vec<_>>(), k);
        let scaled = pk(&xs.iter().map(|x| x * scale).collect::<Vec<_>>(), k);
        prop_assert!((base - shifted).abs() < 1e-9);
        prop_assert!((base - scaled).abs() < 1e-12);
    }

    #[test]
    fn dedh_scale_invariant(seed in 0u64..1000, scale in 0.01f64..100.0) {
        let xs: Vec<f64> = gpd_batch(0.4, 400, seed).iter().map(|x| x + 1.0).collect();
        let base = dh(&xs, 30);
        let scaled = dh(&xs.iter().map(|x| x * scale).collect::<Vec<_>>(), 30);
        prop_assert!((base - scaled).abs() < 1e-12);
    }

    #[test]
    fn estimates_ignore_sample_order(seed in 0u64..1000, rot in 0usize..400) {
        let xs = gpd_batch(0.5, 400, seed);
        let mut ys = xs.clone();
        ys.rotate_left(rot);
        ys.reverse();
        for cfg in [EstimatorConfig::pickands(), EstimatorConfig::dedh()] {
            prop_assert_eq!(estimate(&xs, &cfg).unwrap().value, estimate(&ys, &cfg).unwrap().value);
        }
    }

    #[test]
    fn cte_verdict_ignores_conditional_order(seed in 0u64..1000, rot in 0usize..6) {
        let mut conds: Vec<ConditionalSamples> = (0..6u64)
            .map(|j| ConditionalSamples::new(j, gpd_batch(0.1 * j as f64 - 0.2, 800, seed * 10 + j)))
            .collect();
        let cfg = EstimatorConfig::pickands();
        let rng = RngStream::root(seed);
        let a = cte(&conds, 2, &cfg, &rng).unwrap().verdict;
        conds.rotate_left(rot);
        let b = cte(&conds, 2, &cfg, &rng).unwrap().verdict;
        prop_assert_eq!(a, b);
    }
}
