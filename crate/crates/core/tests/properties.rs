use std::collections::HashMap;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use wallflip_core::dynamics::{validate_state, FlipOutcome, InterfaceState, Simulation};
use wallflip_core::observables::{c_coef, fourier_hat};
use wallflip_core::rng::RngStream;
use wallflip_core::stats::RunningStats;
use wallflip_core::walk::{for_each_nonnegative_path, sample_pi_path, transition_prob, Direction};

fn pi_weight(path: &[i64]) -> f64 {
    path.windows(2)
        .map(|w| {
            let dir = if w[1] > w[0] { Direction::Up } else { Direction::Down };
            transition_prob(w[0], dir).unwrap()
        })
        .product()
}

fn pi_state(size: usize, seed: u64) -> InterfaceState {
    let path = sample_pi_path(size + 1, &mut RngStream::new(seed, 0).rng());
    validate_state(&path.values().iter().map(|&h| h as i64).collect::<Vec<_>>()).unwrap()
}

/// Net probability flow into every configuration of a width-4 lattice
/// vanishes under the first-5-steps marginal of π.
#[test]
fn width_four_flow_balance() {
    let mut states: Vec<Vec<i64>> = Vec::new();
    for_each_nonnegative_path(5, |p| states.push(p.to_vec()));
    let weight: HashMap<Vec<i64>, f64> = states.iter().map(|p| (p.clone(), pi_weight(p))).collect();
    let total: f64 = weight.values().sum();
    assert!((total - 1.0).abs() < 1e-12);
    for x in &states {
        let mut net = 0.0;
        for n in 1..=4 {
            let mut s = validate_state(x).unwrap();
            if s.attempt_flip(n).unwrap() == FlipOutcome::Flipped {
                let y: Vec<i64> = s.heights().iter().map(|&h| h as i64).collect();
                // rate 1 each way: inflow from y minus outflow to y
                net += weight[&y] - weight[x];
            }
        }
        assert!(net.abs() < 1e-12, "{x:?}: {net}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dynamics_preserve_state_constraints(seed in any::<u64>(), size in 2usize..40, horizon in 0.0f64..30.0) {
        let state = pi_state(size, seed);
        let mut sim = Simulation::new(state, RngStream::new(seed, 1));
        let counts = sim.run_until(horizon, ());
        prop_assert!(sim.state().check_invariants().is_ok());
        prop_assert_eq!(sim.state().height(0), 0);
        prop_assert_eq!(sim.state().n_corners(), sim.state().corner_sites().len());
        prop_assert_eq!(sim.state().n_blocked(), sim.state().blocked_sites().len());
        prop_assert!(counts.flips + counts.blocked <= counts.rings);
    }

    #[test]
    fn flips_are_involutions(seed in any::<u64>(), size in 2usize..30, site in 1usize..30) {
        let site = 1 + site % size;
        let orig = pi_state(size, seed);
        let mut s = orig.clone();
        let out = s.attempt_flip(site).unwrap();
        if out == FlipOutcome::Flipped {
            prop_assert!(s != orig);
            prop_assert_eq!(s.attempt_flip(site).unwrap(), FlipOutcome::Flipped);
        }
        prop_assert_eq!(s, orig);
    }

    #[test]
    fn running_stats_merge_is_order_independent(xs in prop::collection::vec(-1e3f64..1e3, 2..300), cuts in 1usize..10, seed in any::<u64>()) {
        let whole = RunningStats::from_slice(&xs);
        let mut chunks: Vec<RunningStats> = xs.chunks(xs.len().div_ceil(cuts)).map(RunningStats::from_slice).collect();
        chunks.shuffle(&mut RngStream::new(seed, 0).rng());
        let merged = chunks.iter().fold(RunningStats::new(), |a, b| a.merge(b));
        prop_assert_eq!(merged.count, whole.count);
        prop_assert!((merged.mean - whole.mean).abs() <= 1e-12 * (1.0 + whole.mean.abs()));
        prop_assert!((merged.variance() - whole.variance()).abs() <= 1e-12 * (1.0 + whole.variance()));
    }

    #[test]
    fn fourier_is_linear_and_hermitian(
        g in prop::collection::vec(-1.0f64..1.0, 2..40),
        h in prop::collection::vec(-1.0f64..1.0, 2..40),
        a in -3.0f64..3.0,
        zeta in -200.0f64..200.0,
    ) {
        let eps = 0.05;
        let n = g.len().min(h.len());
        let mut g = g[..n].to_vec();
        let mut h = h[..n].to_vec();
        g[0] = 0.0;
        h[0] = 0.0;
        let mix: Vec<f64> = g.iter().zip(&h).map(|(x, y)| a * x + y).collect();
        let f = |v: &[f64], z: f64| fourier_hat(v, eps, &[z]).unwrap().values[0];
        let lhs = f(&mix, zeta);
        let rhs = f(&g, zeta) * a + f(&h, zeta);
        prop_assert!((lhs - rhs).norm() < 1e-10);
        prop_assert!((f(&g, -zeta) - f(&g, zeta).conj()).norm() < 1e-12);
        let c = c_coef(zeta, eps);
        prop_assert!((0.0..=eps).contains(&c));
    }
}
