use netslice::curves::grid::GridOracle;
use netslice::cyclic::{
    fixed_reliability, overwrite_deterministic_reliability, overwrite_stochastic_reliability, shared_pool_reliability,
};
use netslice::e2e::{path_delay, SwitchedHop};
use netslice::scenario::{parse_scenario, write_scenario, Priority};
use netslice::{case_study, Arrival, Bucket, Curve, PiecewiseAffineCurve, Server};
use proptest::prelude::*;

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

/// Random non-decreasing piecewise-affine curve through the origin.
fn curve() -> impl Strategy<Value = Curve> {
    prop::collection::vec((0.1f64..5.0, 0.0f64..50.0), 1..4).prop_map(|parts| {
        let mut t = 0.0;
        let mut v = 0.0;
        let mut triples = Vec::new();
        for (len, slope) in parts {
            triples.push((t, v, slope));
            t += len;
            v += slope * len;
        }
        PiecewiseAffineCurve::from_triples(&triples).unwrap()
    })
}

fn stable_pair() -> impl Strategy<Value = (Bucket, Server)> {
    (1.0f64..1000.0, 0.0f64..0.99, 0.0f64..500.0, 0.0f64..10.0).prop_map(|(rate, frac, burst, latency)| {
        (Bucket::new(rate * frac, burst).unwrap(), Server::new(rate, latency).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn convolution_commutes(f in curve(), g in curve(), t in 0.0f64..20.0) {
        let fg = f.convolve(&g).value_clamped(&t);
        let gf = g.convolve(&f).value_clamped(&t);
        prop_assert!(close(fg, gf, 1e-9), "{fg} vs {gf}");
        let scan = GridOracle::new(2_000).convolution_at(&f, &g, t);
        prop_assert!(close(fg, scan, 1e-9), "{fg} vs grid {scan}");
    }

    #[test]
    fn convolution_associates(f in curve(), g in curve(), h in curve(), t in 0.0f64..20.0) {
        let left = f.convolve(&g).convolve(&h).value_clamped(&t);
        let right = f.convolve(&g.convolve(&h)).value_clamped(&t);
        prop_assert!(close(left, right, 1e-9), "{left} vs {right}");
    }

    #[test]
    fn delay_bound_is_the_horizontal_deviation((a, s) in stable_pair()) {
        let closed = a.delay_bound(&s).unwrap();
        let scan = GridOracle::default().horizontal_deviation(&a.curve(), &s.curve()).unwrap();
        prop_assert!(close(closed, scan, 1e-9), "{closed} vs {scan}");
        let exact = a.curve().horizontal_deviation(&s.curve()).unwrap();
        prop_assert!(close(closed, exact, 1e-9));
    }

    #[test]
    fn output_bound_covers_greedy_trajectory((a, s) in stable_pair(), t in 0.0f64..30.0, u in 0.0f64..30.0) {
        // greedy source through a server that serves exactly S; departures D(t) = inf_s A(s) + S(t - s)
        let out = a.output_bound(&s).unwrap();
        let departures = a.curve().convolve(&s.curve());
        let sent = departures.value_clamped(&(t + u)) - departures.value_clamped(&t);
        prop_assert!(sent <= out.value(&u).unwrap() + 1e-9 * sent.abs().max(1.0));
    }

    #[test]
    fn leftover_never_exceeds_service((a, s) in stable_pair(), t in 0.0f64..50.0) {
        let left = s.leftover(&a).unwrap();
        prop_assert!(left.value(&t).unwrap() <= s.value(&t).unwrap() + 1e-9);
    }

    #[test]
    fn chained_bound_beats_sum_of_hops((a, s1) in stable_pair(), extra in 0.0f64..100.0, lat in 0.0f64..5.0) {
        let s2 = Server::new(s1.rate + extra, lat).unwrap();
        let chained = a.delay_bound(&s1.concatenate(&s2)).unwrap();
        let hop1 = a.delay_bound(&s1).unwrap();
        let hop2 = a.output_bound(&s1).unwrap().delay_bound(&s2).unwrap();
        prop_assert!(chained <= hop1 + hop2 + 1e-9);
    }

    #[test]
    fn fixed_reliability_monotone(l1 in 0.0f64..3.0, dl in 0.0f64..3.0, alloc in 0u64..8, extra in 0u64..4) {
        let lo = Arrival::poisson(l1, 32).unwrap();
        let hi = Arrival::poisson(l1 + dl, 32).unwrap();
        prop_assert!(fixed_reliability(&hi, alloc * 32) <= fixed_reliability(&lo, alloc * 32) + 1e-12);
        prop_assert!(fixed_reliability(&lo, alloc * 32) <= fixed_reliability(&lo, (alloc + extra) * 32) + 1e-12);
    }

    #[test]
    fn overwrite_survival_monotone(l1 in 0.0f64..3.0, dl in 0.0f64..3.0, rd in 1u32..8, extra in 0u32..4) {
        let lo = [Arrival::poisson(l1, 32).unwrap()];
        let hi = [Arrival::poisson(l1 + dl, 32).unwrap()];
        for f in [overwrite_deterministic_reliability::<f64>, overwrite_stochastic_reliability::<f64>] {
            prop_assert!(f(rd, &hi) <= f(rd, &lo) + 1e-12);
        }
        prop_assert!(overwrite_stochastic_reliability(rd, &lo) <= overwrite_stochastic_reliability(rd + extra, &lo) + 1e-12);
        prop_assert!(overwrite_deterministic_reliability(rd, &lo) >= 0.0);
    }

    #[test]
    fn shared_pool_grows_with_pool(l1 in 0.0f64..2.0, l2 in 0.0f64..2.0, pool in 0u64..300, extra in 0u64..100) {
        let apps = [Arrival::poisson(l1, 32).unwrap(), Arrival::poisson(l2, 48).unwrap()];
        prop_assert!(shared_pool_reliability(&apps, pool) <= shared_pool_reliability(&apps, pool + extra) + 1e-12);
    }

    #[test]
    fn removing_cross_traffic_never_hurts(
        (a, _) in stable_pair(),
        hb in 0.0f64..2000.0, hr in 0.0f64..3000.0,
        lb in 0.0f64..2000.0, lr in 0.0f64..3000.0,
        high in any::<bool>(),
    ) {
        let rate = 12_500.0;
        let priority = if high { Priority::High } else { Priority::Low };
        let hop = |hc: Bucket, lc: Bucket| SwitchedHop {
            id: "p".into(), rate, priority, high_cross: hc, low_cross: lc, blocking_ms: 0.0,
        };
        let a = Bucket::new(a.rate.min(1000.0), a.burst).unwrap();
        let loaded = [hop(Bucket::new(hr, hb).unwrap(), Bucket::new(lr, lb).unwrap()), hop(Bucket::new(hr, hb).unwrap(), Bucket::zero())];
        let quiet = [hop(Bucket::zero(), Bucket::zero()), hop(Bucket::zero(), Bucket::zero())];
        let dl = path_delay(a, 1.0, &loaded).unwrap().total_ms;
        let dq = path_delay(a, 1.0, &quiet).unwrap().total_ms;
        prop_assert!(dq <= dl + 1e-9, "{dq} > {dl}");
    }

    #[test]
    fn more_high_traffic_slows_low_queue((a, _) in stable_pair(), hb in 0.0f64..2000.0, hr in 0.0f64..3000.0, more in 0.0f64..2000.0) {
        let a = Bucket::new(a.rate.min(1000.0), a.burst).unwrap();
        let hop = |hc: Bucket| [SwitchedHop {
            id: "p".into(), rate: 12_500.0, priority: Priority::Low, high_cross: hc, low_cross: Bucket::zero(), blocking_ms: 0.0,
        }];
        let base = path_delay(a, 0.0, &hop(Bucket::new(hr, hb).unwrap())).unwrap().total_ms;
        let heavier = path_delay(a, 0.0, &hop(Bucket::new(hr, hb + more).unwrap())).unwrap().total_ms;
        prop_assert!(heavier >= base - 1e-9);
    }

    #[test]
    fn scenario_round_trips(lambda in 0.0f64..1.0, loss in 0.0f64..0.1, frames in prop::sample::select(vec![1u32, 2, 4])) {
        let sc = case_study().with_poisson_rate(lambda).unwrap().with_link_loss(loss).with_target_frames(frames).unwrap();
        let text = write_scenario(&sc);
        let back = parse_scenario(&text).unwrap();
        prop_assert_eq!(&back, &sc);
        prop_assert_eq!(write_scenario(&back), text);
    }
}
