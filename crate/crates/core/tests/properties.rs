use std::sync::Arc;

use kslab_core::quadrature::trapezoid;
use kslab_core::solver::step;
use kslab_core::{
    classify, MotilityModel, RadialField, RadialGrid, Regime, SolverConfig, StateSnapshot,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn every_point_gets_one_consistent_label(n in 2usize..6, m in -3.0f64..3.0, q in -3.0f64..3.0) {
        let v = classify(n, m, q);
        let crit = (n as f64 - 2.0) / n as f64;
        let margin = m - q - crit;
        match v.regime {
            Regime::Gb => prop_assert!(margin > 0.0),
            Regime::Iftbu => prop_assert!(margin < 0.0 && q <= 0.0),
            Regime::Ftbu => prop_assert!(margin < 0.0 && q > 0.0 && v.cond_main),
            Regime::Unknown => prop_assert!(margin.abs() <= 1e-12 || (q > 0.0 && !v.cond_main)),
        }
        if margin > 1e-12 {
            prop_assert_eq!(v.regime, Regime::Gb);
        }
    }

    #[test]
    fn log_pair_stays_inside_its_power_sandwich(m in 0.2f64..2.0, s in 0.0f64..1e9) {
        let model = MotilityModel::prototype_log(1.0, m).unwrap();
        let p = model.params().clone();
        let psi = model.psi(s).unwrap();
        let lower = p.k_psi1 * s * (s + 1.0).powf(p.q1 - 1.0);
        let upper = p.k_psi2 * s * (s + 1.0).powf(p.q2 - 1.0);
        prop_assert!(lower <= psi * (1.0 + 1e-12) && psi <= upper * (1.0 + 1e-12));
        let phi = model.phi(s).unwrap();
        let base = (s + 1.0).powf(p.m - 1.0);
        prop_assert!(p.k_phi1 * base <= phi * (1.0 + 1e-12) && phi <= p.k_phi2 * base * (1.0 + 1e-12));
    }

    #[test]
    fn g_is_nonnegative_and_convex(m in -0.5f64..2.0, q in 0.1f64..2.0, s in 0.05f64..500.0) {
        let model = MotilityModel::prototype(3, 1.0, m, q).unwrap();
        let d = 1e-2 * s.min(1.0);
        let (a, b, c) = (model.g(s - d).unwrap(), model.g(s).unwrap(), model.g(s + d).unwrap());
        prop_assert!(b >= 0.0);
        let curvature = (a - 2.0 * b + c) / (d * d);
        let exact = model.phi(s).unwrap() / model.psi(s).unwrap();
        prop_assert!(curvature > 0.0);
        prop_assert!((curvature - exact).abs() <= 1e-3 * exact + 1e-6 * b.max(1.0) / (d * d));
    }

    #[test]
    fn h_matches_s_g_prime_minus_g(m in -0.5f64..2.0, q in 0.1f64..2.0, s in 0.5f64..200.0) {
        let model = MotilityModel::prototype(2, 1.0, m, q).unwrap();
        let d = 1e-4 * s;
        let g_prime = (model.g(s + d).unwrap() - model.g(s - d).unwrap()) / (2.0 * d);
        let lhs = model.h(s).unwrap();
        let rhs = s * g_prime - model.g(s).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-5 * (lhs.abs() + s * g_prime.abs()).max(1.0), "{} vs {}", lhs, rhs);
    }

    #[test]
    fn g_agrees_with_nested_trapezoid(m in 0.0f64..1.5, q in 0.2f64..1.5, s in 2.5f64..60.0) {
        let model = MotilityModel::prototype(3, 1.0, m, q).unwrap();
        let ratio = |t: f64| model.phi(t).unwrap() / model.psi(t).unwrap();
        let nested = |k: usize| trapezoid(|sigma| trapezoid(ratio, 2.0, sigma, k), 2.0, s, k);
        // Richardson step on the O(h²) nested rule.
        let oracle = (4.0 * nested(600) - nested(300)) / 3.0;
        let g = model.g(s).unwrap();
        prop_assert!((g - oracle).abs() <= 1e-6 * g, "G({}) = {} vs {}", s, g, oracle);
    }

    #[test]
    fn one_step_keeps_densities_nonnegative_and_mass(
        m in -0.5f64..1.5,
        q in 0.2f64..1.5,
        u in prop::collection::vec(0.0f64..50.0, 24),
        v in prop::collection::vec(0.0f64..50.0, 24),
    ) {
        let model = MotilityModel::prototype(2, 1.0, m, q).unwrap();
        let grid = Arc::new(RadialGrid::graded(2, 1.0, 24, 1e-3).unwrap());
        let state = StateSnapshot::new(
            0.0,
            RadialField::new(grid.clone(), u).unwrap(),
            RadialField::new(grid, v).unwrap(),
        ).unwrap();
        let m0 = state.mass_u();
        let (next, _) = step(&state, &model, &SolverConfig::default()).unwrap();
        prop_assert!(next.u.min() >= 0.0 && next.v.min() >= 0.0);
        prop_assert!((next.mass_u() - m0).abs() <= 1e-12 * m0.max(1e-300));
    }
}
