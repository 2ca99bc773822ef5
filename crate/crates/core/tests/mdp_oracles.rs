use entropic_core::mdp::{
    entropic_policy_evaluation, entropic_return_ce, entropic_value_iteration, random_layered_mdp,
    risk_neutral_value_iteration, sample_trajectory, FiniteMdp, MdpSpec, RandomMdpShape, TabularPolicy,
};
use entropic_core::RiskAversion;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ra(a: f64) -> RiskAversion {
    RiskAversion::new(a).unwrap()
}

fn small_shape(steps: usize) -> RandomMdpShape {
    RandomMdpShape { steps, states_per_layer: 3, max_actions: 3, max_successors: 3, reward_scale: 1.0 }
}

fn random_policy(mdp: &FiniteMdp, seed: u64) -> TabularPolicy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..mdp.num_states())
        .map(|s| {
            let mut row = vec![0.0; mdp.num_actions()];
            for a in mdp.available_actions(s) {
                row[a] = 0.05 + rng.random::<f64>();
            }
            let total: f64 = row.iter().sum();
            if total > 0.0 {
                row.iter_mut().for_each(|p| *p /= total);
            }
            row
        })
        .collect();
    TabularPolicy::new(mdp, rows).unwrap()
}

/// Every (probability, return) pair reachable from `s`, by plain recursion.
fn paths(mdp: &FiniteMdp, policy: &TabularPolicy, s: usize) -> Vec<(f64, f64)> {
    if mdp.is_terminal(s) {
        return vec![(1.0, 0.0)];
    }
    let mut out = Vec::new();
    for (a, &pa) in policy.action_probs(s).iter().enumerate() {
        if pa == 0.0 {
            continue;
        }
        for t in mdp.transitions(s, a) {
            for (p, g) in paths(mdp, policy, t.next) {
                out.push((pa * t.prob * p, t.reward + g));
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn backward_induction_equals_trajectory_enumeration(seed in 0u64..1_000_000, steps in 1usize..=4, a in prop_oneof![Just(0.0), 0.1..3.0f64]) {
        let mdp = random_layered_mdp(seed, small_shape(steps)).unwrap();
        let pi = random_policy(&mdp, seed ^ 0x5eed);
        let v = entropic_policy_evaluation(&mdp, &pi, ra(a)).unwrap();
        let ce = entropic_return_ce(&mdp, &pi, ra(a)).unwrap();
        prop_assert!((v[mdp.initial_state()] - ce).abs() <= 1e-9);
    }

    #[test]
    fn greedy_policy_attains_optimal_values(seed in 0u64..1_000_000, a in 0.0..3.0f64) {
        let mdp = random_layered_mdp(seed, small_shape(3)).unwrap();
        let sol = entropic_value_iteration(&mdp, ra(a)).unwrap();
        let v = entropic_policy_evaluation(&mdp, &sol.greedy, ra(a)).unwrap();
        for s in 0..mdp.num_states() {
            prop_assert!((v[s] - sol.v_star[s]).abs() <= 1e-10);
            let best = sol.q_star[s].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if !mdp.is_terminal(s) {
                prop_assert_eq!(sol.v_star[s], best);
            }
        }
    }

    #[test]
    fn optimal_value_nonincreasing_in_alpha(seed in 0u64..1_000_000) {
        let mdp = random_layered_mdp(seed, small_shape(3)).unwrap();
        let s0 = mdp.initial_state();
        let vals: Vec<f64> = [0.0, 0.5, 1.0, 2.0].iter().map(|&a| entropic_value_iteration(&mdp, ra(a)).unwrap().v_star[s0]).collect();
        for w in vals.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn no_deterministic_policy_beats_the_optimum(seed in 0u64..1_000_000, a in 0.0..3.0f64) {
        let shape = RandomMdpShape { steps: 3, states_per_layer: 2, max_actions: 2, max_successors: 2, reward_scale: 1.0 };
        let mdp = random_layered_mdp(seed, shape).unwrap();
        let v_star = entropic_value_iteration(&mdp, ra(a)).unwrap().v_star[mdp.initial_state()];
        let choices: Vec<Vec<usize>> = (0..mdp.num_states())
            .map(|s| if mdp.is_terminal(s) { vec![0] } else { mdp.available_actions(s).collect() })
            .collect();
        let mut idx = vec![0usize; choices.len()];
        loop {
            let actions: Vec<usize> = idx.iter().zip(&choices).map(|(&i, c)| c[i]).collect();
            let pi = TabularPolicy::deterministic(&mdp, &actions).unwrap();
            let v = entropic_policy_evaluation(&mdp, &pi, ra(a)).unwrap()[mdp.initial_state()];
            prop_assert!(v <= v_star + 1e-10);
            // odometer over the per-state choices
            let mut k = 0;
            while k < idx.len() {
                idx[k] += 1;
                if idx[k] < choices[k].len() { break; }
                idx[k] = 0;
                k += 1;
            }
            if k == idx.len() { break; }
        }
    }

    #[test]
    fn final_step_shift_moves_every_value(seed in 0u64..1_000_000, c in -3.0..3.0f64, a in 0.0..3.0f64) {
        let mdp = random_layered_mdp(seed, small_shape(3)).unwrap();
        let pi = random_policy(&mdp, seed + 7);
        let mut spec: MdpSpec = mdp.to_spec();
        for t in spec.transitions.iter_mut() {
            if spec.terminal.contains(&t.next) {
                t.reward += c;
            }
        }
        let shifted = FiniteMdp::new(spec).unwrap();
        let v0 = entropic_policy_evaluation(&mdp, &pi, ra(a)).unwrap();
        let v1 = entropic_policy_evaluation(&shifted, &pi, ra(a)).unwrap();
        for s in 0..mdp.num_states() {
            let expect = if mdp.is_terminal(s) { 0.0 } else { c };
            prop_assert!((v1[s] - v0[s] - expect).abs() <= 1e-10);
        }
    }
}

#[test]
fn risk_neutral_matches_brute_force_expectation() {
    for seed in 0..20 {
        let mdp = random_layered_mdp(seed, small_shape(3)).unwrap();
        let sol = risk_neutral_value_iteration(&mdp).unwrap();
        let v = entropic_policy_evaluation(&mdp, &sol.greedy, ra(0.0)).unwrap();
        let brute: f64 = paths(&mdp, &sol.greedy, mdp.initial_state()).iter().map(|(p, g)| p * g).sum();
        assert!((v[mdp.initial_state()] - brute).abs() < 1e-12);
        assert!((sol.v_star[mdp.initial_state()] - brute).abs() < 1e-12);
        let near = entropic_value_iteration(&mdp, ra(1e-8)).unwrap();
        for s in 0..mdp.num_states() {
            assert!((near.v_star[s] - sol.v_star[s]).abs() <= 1e-6);
        }
    }
}

#[test]
fn enumeration_ce_matches_direct_log_sum() {
    for seed in 0..20 {
        let mdp = random_layered_mdp(seed, small_shape(4)).unwrap();
        let pi = random_policy(&mdp, seed);
        let a = 1.3;
        let direct = -(paths(&mdp, &pi, mdp.initial_state()).iter().map(|(p, g)| p * (-a * g).exp()).sum::<f64>()).ln() / a;
        assert!((entropic_return_ce(&mdp, &pi, ra(a)).unwrap() - direct).abs() < 1e-10);
    }
}

#[test]
fn sampled_returns_sum_their_rewards() {
    let mdp = random_layered_mdp(3, small_shape(4)).unwrap();
    let pi = random_policy(&mdp, 3);
    let mut mean = 0.0;
    let n = 20_000;
    for seed in 0..n {
        let traj = sample_trajectory(&mdp, &pi, seed).unwrap();
        let total: f64 = traj.steps.iter().map(|s| s.reward).sum();
        assert!((traj.total_return - total).abs() <= 1e-12);
        assert_eq!(traj.steps[0].state, mdp.initial_state());
        assert!(mdp.is_terminal(traj.steps.last().unwrap().next));
        assert!(traj.steps.len() <= mdp.horizon());
        mean += traj.total_return / n as f64;
    }
    let exact = entropic_policy_evaluation(&mdp, &pi, ra(0.0)).unwrap()[mdp.initial_state()];
    // rewards lie in [−1, 1] and there are at most four steps
    assert!((mean - exact).abs() < 4.0 * 4.0 / (n as f64).sqrt());
    assert_eq!(sample_trajectory(&mdp, &pi, 9).unwrap(), sample_trajectory(&mdp, &pi, 9).unwrap());
}
