//! Property-based checks of invariants that hold for every admissible input.

use proptest::prelude::*;
use transit_lab::finite_eps_sim::{self, FamilyKind};
use transit_lab::laplace_ode::{self, Controls};
use transit_lab::{rng, stats, Complex64, ModelSpec, ScaleTable};

fn model() -> impl Strategy<Value = ModelSpec> {
    (3u32..=6, -1.5f64..1.5).prop_map(|(d, mu)| ModelSpec::new(d, if d % 2 == 1 { mu } else { mu.max(-1.0) }).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn potential_derivatives_are_consistent(m in model(), y in -3.0f64..3.0) {
        let h = 1e-5;
        let fd1 = (m.v(y + h) - m.v(y - h)) / (2.0 * h);
        let fd2 = (m.v_prime(y + h) - m.v_prime(y - h)) / (2.0 * h);
        prop_assert!((fd1 - m.v_prime(y)).abs() <= 1e-6 * (1.0 + m.v_prime(y).abs()));
        prop_assert!((fd2 - m.v_second(y)).abs() <= 1e-6 * (1.0 + m.v_second(y).abs()));
    }

    #[test]
    fn derived_seeds_are_deterministic_and_distinct(base in any::<u64>(), i in 0u64..1_000_000, j in 0u64..1_000_000) {
        prop_assert_eq!(rng::derive(base, i), rng::derive(base, i));
        if i != j {
            prop_assert_ne!(finite_eps_sim::sample_seed(base, i), finite_eps_sim::sample_seed(base, j));
        }
    }

    #[test]
    fn ks_distance_is_a_symmetric_bounded_metric(a in prop::collection::vec(-10.0f64..10.0, 5..60), b in prop::collection::vec(-10.0f64..10.0, 5..60)) {
        let ab = stats::ks_two_sample(&a, &b);
        let ba = stats::ks_two_sample(&b, &a);
        prop_assert!((ab.statistic - ba.statistic).abs() < 1e-15);
        prop_assert!((0.0..=1.0).contains(&ab.statistic));
        prop_assert!((0.0..=1.0).contains(&ab.p_value));
        prop_assert_eq!(stats::ks_two_sample(&a, &a).statistic, 0.0);
    }

    #[test]
    fn bootstrap_interval_brackets_the_mean(x in prop::collection::vec(0.0f64..5.0, 20..200), seed in any::<u64>()) {
        let ci = stats::bootstrap_mean(&x, 200, 0.99, seed).unwrap();
        prop_assert!(ci.lo <= ci.hi);
        prop_assert!(ci.lo <= ci.estimate + 1e-12 && ci.estimate <= ci.hi + 1e-12);
    }

    #[test]
    fn family_names_round_trip(i in 0usize..FamilyKind::ALL.len()) {
        let k = FamilyKind::ALL[i];
        prop_assert_eq!(k.name().parse::<FamilyKind>().unwrap(), k);
    }
}

proptest! {
    // Each case integrates the transform ODE; keep the count small.
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn transform_is_a_decreasing_log_convex_map_into_unit_interval(m in model(), l in -3.0f64..-0.05) {
        let c = Controls::default();
        let f = |x: f64| laplace_ode::log_phi(&m, Complex64::new(x, 0.0), &c).unwrap().re;
        let (a, b, mid) = (f(l), f(0.5 * l), f(0.75 * l));
        // Φ(λ) = E e^{λT} lies in (0, 1) and increases towards λ = 0.
        prop_assert!(a < 0.0 && a < b && b < 0.0);
        // ln Φ is convex (a cumulant generating function).
        prop_assert!(mid <= 0.5 * (a + b) + 1e-9);
    }

    #[test]
    fn scale_function_is_increasing_and_invertible(m in model(), y in -2.0f64..2.0) {
        let t = ScaleTable::build(m, 1e-10).unwrap();
        prop_assert!(t.s(y) < t.s(y + 0.1));
        let back = t.s_inv(t.s(y)).unwrap();
        prop_assert!((back - y).abs() < 1e-6, "{} vs {}", back, y);
    }
}
