use blocktail::block_data::BlockData;
use blocktail::distributions::HeavyTailModel;
use blocktail::likelihood::{chi2_critical, el_statistic, likelihood_ci, Method, Profile, DEFAULT_A_N};
use blocktail::montecarlo::{replicate_rng, simulate_blocks};
use proptest::prelude::*;

fn draw(model: HeavyTailModel, k: usize, m: usize, r: usize, seed: u64) -> BlockData {
    let mut rng = replicate_rng(seed, k, 0);
    simulate_blocks(&model, k, m, r, &mut rng)
}

fn model_strategy() -> impl Strategy<Value = HeavyTailModel> {
    prop_oneof![
        Just(HeavyTailModel::Frechet { a: 1.0 }),
        Just(HeavyTailModel::Burr { a: 0.5, b: 1.0 }),
        Just(HeavyTailModel::Burr { a: 1.0, b: 0.5 }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ael_never_exceeds_el(
        model in model_strategy(),
        k in 5usize..60,
        r in 1usize..3,
        seed in any::<u64>(),
        offsets in prop::collection::vec(-3.0f64..3.0, 10),
    ) {
        let data = draw(model, k, 40, r, seed);
        let prof = Profile::new(&data, 1e-3).unwrap();
        let centre = prof.estimate().log_xp_hat;
        let se = prof.estimate().se_log_xp;
        for off in offsets {
            let y = centre + off * se;
            let (el, ael) = (prof.el(y), prof.ael(y, DEFAULT_A_N));
            prop_assert!(ael.is_finite());
            prop_assert!(ael >= 0.0);
            prop_assert!(ael <= el * (1.0 + 1e-12) + 1e-12, "y = {y}: ael {ael} > el {el}");
        }
    }

    #[test]
    fn ael_interval_contains_el_interval(
        model in model_strategy(),
        k in 5usize..60,
        seed in any::<u64>(),
    ) {
        let data = draw(model, k, 50, 1, seed);
        let el = likelihood_ci(&data, 1e-3, 0.05, Method::El, DEFAULT_A_N).unwrap();
        let ael = likelihood_ci(&data, 1e-3, 0.05, Method::Ael, DEFAULT_A_N).unwrap();
        prop_assert!(ael.lower <= el.lower + 2e-6);
        prop_assert!(ael.upper >= el.upper - 2e-6);
        prop_assert!(el.lower < el.point && el.point < el.upper);
    }

    #[test]
    fn statistic_vanishes_at_point_estimate(model in model_strategy(), k in 2usize..80, seed in any::<u64>()) {
        let data = draw(model, k, 30, 2, seed);
        let prof = Profile::new(&data, 1e-3).unwrap();
        let y = prof.estimate().log_xp_hat;
        prop_assert!(prof.el(y) < 1e-20);
        prop_assert!(prof.ael(y, DEFAULT_A_N) < 1e-20);
    }
}

#[test]
fn endpoints_sit_on_the_critical_value() {
    let c = chi2_critical(0.05).unwrap();
    for seed in 0..20 {
        let data = draw(HeavyTailModel::Frechet { a: 1.0 }, 30, 60, 1, seed);
        let prof = Profile::new(&data, 1e-3).unwrap();
        for method in [Method::El, Method::Ael] {
            let ci = prof.interval(method, 0.05, DEFAULT_A_N).unwrap();
            if ci.diagnostics.hull_failure_at_endpoints {
                continue;
            }
            for (y, inward) in [(ci.lower, 1e-5), (ci.upper, -1e-5)] {
                assert!(prof.statistic(method, y + inward, DEFAULT_A_N) < c);
                assert!(prof.statistic(method, y - inward, DEFAULT_A_N) > c);
            }
        }
    }
}

/// `statistic(y0) < c` agrees with membership of `y0` in the interval.
#[test]
fn coverage_identity_over_replicates() {
    let model = HeavyTailModel::Burr { a: 0.5, b: 1.0 };
    let c = chi2_critical(0.05).unwrap();
    let (k, m, p) = (20, 50, 1e-3);
    let y0 = model.true_log_quantile(p).unwrap();
    let mut agree = 0;
    for i in 0..100 {
        let mut rng = replicate_rng(77, k, i);
        let data = simulate_blocks(&model, k, m, 1, &mut rng);
        let prof = Profile::new(&data, p).unwrap();
        for method in [Method::El, Method::Ael] {
            let ci = prof.interval(method, 0.05, DEFAULT_A_N).unwrap();
            let stat = prof.statistic(method, y0, DEFAULT_A_N);
            let near_edge = (y0 - ci.lower).abs() < 1e-5 || (y0 - ci.upper).abs() < 1e-5;
            if !near_edge {
                assert_eq!(stat < c, ci.lower < y0 && y0 < ci.upper, "replicate {i} {method}");
                agree += 1;
            }
        }
    }
    assert!(agree >= 190);
}

#[test]
fn el_hull_failure_is_infinite_and_ael_is_not() {
    let data = draw(HeavyTailModel::Frechet { a: 1.0 }, 10, 100, 1, 4);
    let prof = Profile::new(&data, 1e-3).unwrap();
    let far = prof.estimate().log_xp_hat + 1e3;
    assert_eq!(el_statistic(&data, 1e-3, far).unwrap(), f64::INFINITY);
    assert!(prof.ael(far, DEFAULT_A_N).is_finite());
}
