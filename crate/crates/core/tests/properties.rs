//! Cross-module properties: encoding bijections, decoding, penalty scaling,
//! sampling statistics and energy-shift invariance.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use qaoa_vrp::encoder::{build_qubo, default_penalty};
use qaoa_vrp::instance::{
    classify, decode, preset, var_index, var_pair, Configuration, FeasibilityClass,
};
use qaoa_vrp::oracle::{degree_feasible_configurations, exhaustive_ground_state, optimal_routes};
use qaoa_vrp::simulator::{evolve, CostDiagonal, QaoaSchedule, Statevector};
use qaoa_vrp::Instance;

fn random_instance(n: usize, k: usize, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        0.0
                    } else {
                        rng.random_range(0.0..50.0)
                    }
                })
                .collect()
        })
        .collect();
    Instance::new(k, w).unwrap()
}

proptest! {
    #[test]
    fn var_pair_inverts_var_index(n in 2usize..=12, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let i = rng.random_range(0..n);
        let j = (i + rng.random_range(1..n)) % n;
        let t = var_index(n, i, j).unwrap();
        prop_assert!(t < n * (n - 1));
        prop_assert_eq!(var_pair(n, t).unwrap(), (i, j));
    }

    #[test]
    fn classification_is_consistent(n in 3usize..=6, k in 1usize..=3, index in any::<u64>()) {
        prop_assume!(k < n);
        let vars = n * (n - 1);
        let config = Configuration::new(n, u128::from(index) & ((1u128 << vars) - 1)).unwrap();
        let c = classify(&config, k);
        if c.class == FeasibilityClass::RouteFeasible {
            prop_assert!(c.class.is_degree_feasible());
            prop_assert!(c.subtours.is_empty());
            prop_assert_eq!(c.routes.len(), k);
        }
        if c.class.is_degree_feasible() {
            let mut covered = vec![false; n];
            for cycle in c.routes.iter().chain(&c.subtours) {
                for &v in cycle {
                    covered[v] = true;
                }
            }
            let mut active = vec![false; n];
            for (i, j) in config.edges() {
                active[i] = true;
                active[j] = true;
            }
            prop_assert_eq!(covered, active);
        } else {
            prop_assert!(c.routes.is_empty() && c.subtours.is_empty());
        }
    }

    #[test]
    fn penalty_part_scales_linearly(lambda in 0.1f64..50.0, z in 0u64..4096, seed in any::<u64>()) {
        let inst = random_instance(4, 2, seed);
        let a = default_penalty(&inst);
        let base = build_qubo(&inst, a).unwrap();
        let scaled = build_qubo(&inst, lambda * a).unwrap();
        let cost = inst.route_cost(&Configuration::new(4, u128::from(z)).unwrap());
        let lhs = scaled.energy_index(z) - cost;
        let rhs = lambda * (base.energy_index(z) - cost);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0));
    }

    #[test]
    fn energy_shift_moves_expectation_only(delta in -1e3f64..1e3, beta in -3.0f64..3.0, gamma in -0.02f64..0.02) {
        let inst: Instance = preset("vrp-4-2").unwrap();
        let qubo = build_qubo(&inst, default_penalty(&inst)).unwrap();
        let diag = CostDiagonal::from_qubo(&qubo).unwrap();
        let shifted = diag.shifted(delta);
        let schedule = QaoaSchedule::new(vec![beta, 0.5 * beta], vec![gamma, 2.0 * gamma]).unwrap();
        let a = evolve(&schedule, &diag).unwrap();
        let b = evolve(&schedule, &shifted).unwrap();
        let e = a.expectation(&diag);
        prop_assert!((b.expectation(&shifted) - (e + delta)).abs() <= 1e-9 * (e.abs() + delta.abs()));
        // Same amplitudes up to one global phase.
        let phase = b.amplitudes()[0] / a.amplitudes()[0];
        for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
            prop_assert!((x * phase - y).norm() < 1e-9);
        }
    }
}

#[test]
fn every_degree_feasible_configuration_decomposes() {
    for (n, k) in [(3, 1), (3, 2), (4, 1), (4, 2), (4, 3), (5, 2), (5, 3)] {
        let inst = random_instance(n, k, 1);
        let all = degree_feasible_configurations(&inst).unwrap();
        let mut routed = 0;
        for z in all {
            let config = Configuration::new(n, u128::from(z)).unwrap();
            let c = classify(&config, k);
            assert!(c.class.is_degree_feasible(), "n = {n}, k = {k}, z = {z}");
            let mut seen = vec![0; n];
            for cycle in c.routes.iter().chain(&c.subtours) {
                for &v in &cycle[1..] {
                    seen[v] += 1;
                }
            }
            assert_eq!(seen[0], k);
            assert!(seen[1..].iter().all(|&m| m == 1));
            assert_eq!(c.routes.len(), k);
            if c.class == FeasibilityClass::RouteFeasible {
                assert!(c.subtours.is_empty());
                routed += 1;
            } else {
                assert!(!c.subtours.is_empty());
            }
        }
        assert!(routed > 0);
    }
}

#[test]
fn decode_encode_round_trip_exhaustive_at_twelve_variables() {
    for index in 0..1u128 << 12 {
        let c = Configuration::new(4, index).unwrap();
        assert_eq!(Configuration::from_edges(4, &decode(&c)).unwrap(), c);
    }
}

#[test]
fn decode_encode_round_trip_sampled_at_twenty_variables() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for _ in 0..100_000 {
        let c = Configuration::new(5, rng.random_range(0..1u128 << 20)).unwrap();
        assert_eq!(Configuration::from_edges(5, &decode(&c)).unwrap(), c);
    }
}

#[test]
fn argmin_is_stable_above_the_feasibility_threshold() {
    let inst: Instance = preset("vrp-4-2").unwrap();
    for a in [200.0, 2000.0, 20000.0] {
        let ground = exhaustive_ground_state(&build_qubo(&inst, a).unwrap()).unwrap();
        assert_eq!(ground.argmin, vec![779, 2125], "A = {a}");
    }
}

#[test]
fn one_vehicle_per_location_is_forced() {
    for seed in 0..5 {
        let inst = random_instance(5, 4, seed);
        let best = optimal_routes(&inst).unwrap();
        let expected: f64 = (1..5).map(|i| inst.weight(0, i) + inst.weight(i, 0)).sum();
        assert!((best.cost - expected).abs() < 1e-9);
        assert_eq!(best.solutions.len(), 1);
        assert!(best.solutions[0].routes.iter().all(|r| r.len() == 3));
    }
}

#[test]
fn uniform_sampling_passes_chi_square() {
    let n = 12;
    let shots = 1_000_000;
    let counts = Statevector::<f64>::plus(n)
        .unwrap()
        .sample(shots, 7)
        .unwrap();
    let bins = 1usize << n;
    let expected = shots as f64 / bins as f64;
    let statistic: f64 = (0..bins as u64)
        .map(|z| {
            let observed = counts.get(&z).copied().unwrap_or(0) as f64;
            (observed - expected).powi(2) / expected
        })
        .sum();
    let p_value = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(statistic);
    assert!(p_value > 0.001, "chi-square {statistic}, p = {p_value}");
}
