//! Finite-horizon MDPs with exact risk-neutral and entropic dynamic programming.
//!
//! The timestamp is folded into the state: a valid [`FiniteMdp`] is a DAG in
//! which every path reaches a terminal state within `horizon` steps. Backward
//! induction over that DAG gives exact value functions, which serve as ground
//! truth for the sampling-based learners.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::entropic::{certainty_equivalent, weighted_ce, DiscreteDistribution, RiskAversion, PROB_SUM_TOL};
use crate::error::{input, Error, Result};

/// Maximum number of trajectories [`entropic_return_ce`] will enumerate.
pub const ENUMERATION_LIMIT: usize = 1_000_000;

/// One outcome of taking an action: next state, probability and reward.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub next: usize,
    pub prob: f64,
    pub reward: f64,
}

/// Serialised form of a [`FiniteMdp`]: dense header plus sparse transition triples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdpSpec {
    pub num_states: usize,
    pub num_actions: usize,
    pub initial_state: usize,
    pub horizon: usize,
    /// Indices of terminal states.
    pub terminal: Vec<usize>,
    pub transitions: Vec<TransitionSpec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionSpec {
    pub state: usize,
    pub action: usize,
    pub next: usize,
    pub prob: f64,
    pub reward: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MdpSpec", into = "MdpSpec")]
pub struct FiniteMdp {
    num_actions: usize,
    initial_state: usize,
    horizon: usize,
    terminal: Vec<bool>,
    /// `transitions[s][a]`; empty when the action is unavailable in `s`.
    transitions: Vec<Vec<Vec<Transition>>>,
    /// States ordered so that every successor precedes its predecessors.
    backward_order: Vec<usize>,
    /// Longest number of steps from each state to termination.
    remaining: Vec<usize>,
}

impl FiniteMdp {
    pub fn new(spec: MdpSpec) -> Result<Self> {
        let MdpSpec { num_states, num_actions, initial_state, horizon, terminal: term_list, transitions: triples } =
            spec;
        if num_states == 0 || num_actions == 0 {
            return Err(Error::Model("MDP needs at least one state and one action".into()));
        }
        if initial_state >= num_states {
            return Err(Error::Model(format!("initial state {initial_state} out of range")));
        }
        let mut terminal = vec![false; num_states];
        for &s in &term_list {
            if s >= num_states {
                return Err(Error::Model(format!("terminal state {s} out of range")));
            }
            terminal[s] = true;
        }
        let mut transitions = vec![vec![Vec::<Transition>::new(); num_actions]; num_states];
        for t in &triples {
            if t.state >= num_states || t.next >= num_states || t.action >= num_actions {
                return Err(Error::Model(format!("transition {t:?} has an index out of range")));
            }
            if terminal[t.state] {
                return Err(Error::Model(format!("terminal state {} has outgoing transitions", t.state)));
            }
            if !(t.prob > 0.0 && t.prob <= 1.0) || !t.reward.is_finite() {
                return Err(Error::Model(format!("transition {t:?} needs prob in (0, 1] and a finite reward")));
            }
            let row = &mut transitions[t.state][t.action];
            if row.iter().any(|x| x.next == t.next) {
                return Err(Error::Model(format!(
                    "duplicate transition ({}, {}, {})",
                    t.state, t.action, t.next
                )));
            }
            row.push(Transition { next: t.next, prob: t.prob, reward: t.reward });
        }
        for (s, actions) in transitions.iter().enumerate() {
            if terminal[s] {
                continue;
            }
            let mut any = false;
            for (a, row) in actions.iter().enumerate() {
                if row.is_empty() {
                    continue;
                }
                any = true;
                let total: f64 = row.iter().map(|t| t.prob).sum();
                if (total - 1.0).abs() > PROB_SUM_TOL {
                    return Err(Error::Model(format!(
                        "transition probabilities of ({s}, {a}) sum to {total}"
                    )));
                }
            }
            if !any {
                return Err(Error::Model(format!("non-terminal state {s} has no available action")));
            }
        }

        let (backward_order, remaining) = layer(&transitions, &terminal)?;
        if let Some((s, r)) = remaining.iter().enumerate().find(|(_, r)| **r > horizon) {
            return Err(Error::Model(format!(
                "state {s} needs {r} steps to terminate, beyond horizon {horizon}"
            )));
        }
        Ok(Self { num_actions, initial_state, horizon, terminal, transitions, backward_order, remaining })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: MdpSpec = serde_json::from_str(text).map_err(|e| Error::Input(format!("bad MDP JSON: {e}")))?;
        Self::new(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_spec()).expect("MDP spec is always serialisable")
    }

    pub fn to_spec(&self) -> MdpSpec {
        let mut transitions = Vec::new();
        for (state, actions) in self.transitions.iter().enumerate() {
            for (action, row) in actions.iter().enumerate() {
                for t in row {
                    transitions.push(TransitionSpec { state, action, next: t.next, prob: t.prob, reward: t.reward });
                }
            }
        }
        MdpSpec {
            num_states: self.num_states(),
            num_actions: self.num_actions,
            initial_state: self.initial_state,
            horizon: self.horizon,
            terminal: (0..self.num_states()).filter(|&s| self.terminal[s]).collect(),
            transitions,
        }
    }

    pub fn num_states(&self) -> usize {
        self.terminal.len()
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn transitions(&self, s: usize, a: usize) -> &[Transition] {
        &self.transitions[s][a]
    }

    pub fn is_available(&self, s: usize, a: usize) -> bool {
        !self.transitions[s][a].is_empty()
    }

    pub fn available_actions(&self, s: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_actions).filter(move |&a| self.is_available(s, a))
    }

    /// Successors-first ordering used by backward induction.
    pub fn backward_order(&self) -> &[usize] {
        &self.backward_order
    }

    /// Longest path length from `s` to a terminal state.
    pub fn remaining_steps(&self, s: usize) -> usize {
        self.remaining[s]
    }
}

impl TryFrom<MdpSpec> for FiniteMdp {
    type Error = Error;

    fn try_from(spec: MdpSpec) -> Result<Self> {
        Self::new(spec)
    }
}

impl From<FiniteMdp> for MdpSpec {
    fn from(mdp: FiniteMdp) -> Self {
        mdp.to_spec()
    }
}

/// Topological layering; fails on cycles and on dead ends.
fn layer(transitions: &[Vec<Vec<Transition>>], terminal: &[bool]) -> Result<(Vec<usize>, Vec<usize>)> {
    const UNSEEN: u8 = 0;
    const OPEN: u8 = 1;
    const DONE: u8 = 2;
    let n = terminal.len();
    let succ: Vec<Vec<usize>> = transitions
        .iter()
        .map(|actions| actions.iter().flatten().map(|t| t.next).collect())
        .collect();
    let mut mark = vec![UNSEEN; n];
    let mut remaining = vec![0usize; n];
    let mut order = Vec::with_capacity(n);
    for root in 0..n {
        if mark[root] != UNSEEN {
            continue;
        }
        // iterative DFS over (state, successor cursor)
        let mut stack = vec![(root, 0usize)];
        mark[root] = OPEN;
        while let Some(top) = stack.last_mut() {
            let s = top.0;
            if top.1 < succ[s].len() {
                let next = succ[s][top.1];
                top.1 += 1;
                match mark[next] {
                    UNSEEN => {
                        mark[next] = OPEN;
                        stack.push((next, 0));
                    }
                    OPEN => return Err(Error::Model(format!("transition graph has a cycle through state {next}"))),
                    _ => {}
                }
            } else {
                remaining[s] = if terminal[s] { 0 } else { 1 + succ[s].iter().map(|&x| remaining[x]).max().unwrap_or(0) };
                mark[s] = DONE;
                order.push(s);
                stack.pop();
            }
        }
    }
    Ok((order, remaining))
}

/// A Markov policy: one action distribution per state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabularPolicy {
    probs: Vec<Vec<f64>>,
}

impl TabularPolicy {
    /// Rows for terminal states are ignored but must have the right length.
    pub fn new(mdp: &FiniteMdp, probs: Vec<Vec<f64>>) -> Result<Self> {
        if probs.len() != mdp.num_states() {
            return input(format!("policy has {} rows, MDP has {} states", probs.len(), mdp.num_states()));
        }
        for (s, row) in probs.iter().enumerate() {
            if row.len() != mdp.num_actions() {
                return input(format!("policy row {s} has {} entries", row.len()));
            }
            if mdp.is_terminal(s) {
                continue;
            }
            let total: f64 = row.iter().sum();
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (total - 1.0).abs() > PROB_SUM_TOL {
                return input(format!("policy row {s} is not a distribution"));
            }
            if let Some(a) = (0..row.len()).find(|&a| row[a] > 0.0 && !mdp.is_available(s, a)) {
                return input(format!("policy puts mass on unavailable action {a} in state {s}"));
            }
        }
        Ok(Self { probs })
    }

    pub fn deterministic(mdp: &FiniteMdp, actions: &[usize]) -> Result<Self> {
        if actions.len() != mdp.num_states() {
            return input("one action per state required");
        }
        let probs = actions
            .iter()
            .enumerate()
            .map(|(s, &a)| {
                let mut row = vec![0.0; mdp.num_actions()];
                if !mdp.is_terminal(s) && a < row.len() {
                    row[a] = 1.0;
                }
                row
            })
            .collect();
        Self::new(mdp, probs)
    }

    /// Uniform over the available actions of each state.
    pub fn uniform(mdp: &FiniteMdp) -> Self {
        let probs = (0..mdp.num_states())
            .map(|s| {
                let mut row = vec![0.0; mdp.num_actions()];
                let avail: Vec<usize> = mdp.available_actions(s).collect();
                for &a in &avail {
                    row[a] = 1.0 / avail.len() as f64;
                }
                row
            })
            .collect();
        Self { probs }
    }

    pub fn action_probs(&self, s: usize) -> &[f64] {
        &self.probs[s]
    }

    fn check(&self, mdp: &FiniteMdp) -> Result<()> {
        if self.probs.len() != mdp.num_states() || self.probs.iter().any(|r| r.len() != mdp.num_actions()) {
            return input("policy shape does not match MDP");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Step {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub total_return: f64,
}

pub fn sample_trajectory(mdp: &FiniteMdp, policy: &TabularPolicy, seed: u64) -> Result<Trajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_trajectory_with(mdp, policy, &mut rng)
}

pub fn sample_trajectory_with<R: Rng + ?Sized>(
    mdp: &FiniteMdp,
    policy: &TabularPolicy,
    rng: &mut R,
) -> Result<Trajectory> {
    policy.check(mdp)?;
    let mut s = mdp.initial_state();
    let mut steps = Vec::new();
    let mut total_return = 0.0;
    while !mdp.is_terminal(s) {
        if steps.len() >= mdp.horizon() {
            return Err(Error::Model(format!("no terminal state reached within horizon {}", mdp.horizon())));
        }
        let a = sample_index(policy.action_probs(s), rng)
            .ok_or_else(|| Error::Input(format!("policy row {s} has no mass")))?;
        let row = mdp.transitions(s, a);
        let k = sample_index_by(row.len(), |i| row[i].prob, rng)
            .ok_or_else(|| Error::Input(format!("action {a} unavailable in state {s}")))?;
        let t = row[k];
        steps.push(Step { state: s, action: a, reward: t.reward, next: t.next });
        total_return += t.reward;
        s = t.next;
    }
    Ok(Trajectory { steps, total_return })
}

/// Inverse-CDF draw from unnormalised non-negative weights.
pub(crate) fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> Option<usize> {
    sample_index_by(probs.len(), |i| probs[i], rng)
}

pub(crate) fn sample_index_by<R: Rng + ?Sized>(n: usize, weight: impl Fn(usize) -> f64, rng: &mut R) -> Option<usize> {
    let total: f64 = (0..n).map(&weight).sum();
    if !(total > 0.0) {
        return None;
    }
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = None;
    for i in 0..n {
        let w = weight(i);
        if w > 0.0 {
            acc += w;
            last = Some(i);
            if u < acc {
                return Some(i);
            }
        }
    }
    last
}

/// Ṽ^π by backward induction: `Ṽ(s) = CE_{a,s′}[r + Ṽ(s′)]`, terminal values 0.
pub fn entropic_policy_evaluation(mdp: &FiniteMdp, policy: &TabularPolicy, ra: RiskAversion) -> Result<Vec<f64>> {
    policy.check(mdp)?;
    let alpha = ra.alpha();
    let mut v = vec![0.0; mdp.num_states()];
    let mut pairs = Vec::new();
    for &s in mdp.backward_order() {
        if mdp.is_terminal(s) {
            continue;
        }
        pairs.clear();
        for (a, &pa) in policy.action_probs(s).iter().enumerate() {
            if pa > 0.0 {
                pairs.extend(mdp.transitions(s, a).iter().map(|t| (pa * t.prob, t.reward + v[t.next])));
            }
        }
        v[s] = weighted_ce(pairs.iter().copied(), alpha);
    }
    Ok(v)
}

/// Optimal values, action values and the greedy policy of a finite MDP.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimalSolution {
    pub v_star: Vec<f64>,
    /// `−∞` for unavailable actions; all zero in terminal states.
    pub q_star: Vec<Vec<f64>>,
    pub greedy: TabularPolicy,
    pub greedy_actions: Vec<usize>,
}

/// Ṽ*, Q̃* by backward induction with `Q̃*(s,a) = CE_{s′}[r + Ṽ*(s′)]`.
///
/// Ties in the greedy argmax go to the lowest action index.
pub fn entropic_value_iteration(mdp: &FiniteMdp, ra: RiskAversion) -> Result<OptimalSolution> {
    let alpha = ra.alpha();
    solve_optimal(mdp, |row, v| weighted_ce(row.iter().map(|t| (t.prob, t.reward + v[t.next])), alpha))
}

/// V*, Q* with plain expectations.
pub fn risk_neutral_value_iteration(mdp: &FiniteMdp) -> Result<OptimalSolution> {
    solve_optimal(mdp, |row, v| row.iter().map(|t| t.prob * (t.reward + v[t.next])).sum())
}

fn solve_optimal(mdp: &FiniteMdp, backup: impl Fn(&[Transition], &[f64]) -> f64) -> Result<OptimalSolution> {
    let (n, m) = (mdp.num_states(), mdp.num_actions());
    let mut v = vec![0.0; n];
    let mut q = vec![vec![0.0; m]; n];
    let mut greedy_actions = vec![0usize; n];
    for &s in mdp.backward_order() {
        if mdp.is_terminal(s) {
            continue;
        }
        let mut best = (usize::MAX, f64::NEG_INFINITY);
        for a in 0..m {
            let row = mdp.transitions(s, a);
            q[s][a] = if row.is_empty() { f64::NEG_INFINITY } else { backup(row, &v) };
            if !row.is_empty() && (best.0 == usize::MAX || q[s][a] > best.1) {
                best = (a, q[s][a]);
            }
        }
        greedy_actions[s] = best.0;
        v[s] = best.1;
    }
    let greedy = TabularPolicy::deterministic(mdp, &greedy_actions)?;
    Ok(OptimalSolution { v_star: v, q_star: q, greedy, greedy_actions })
}

/// CE of the full return from the initial state, by enumerating every trajectory.
///
/// Independent of the backward recursion in [`entropic_policy_evaluation`];
/// agreement of the two is the tower property.
pub fn entropic_return_ce(mdp: &FiniteMdp, policy: &TabularPolicy, ra: RiskAversion) -> Result<f64> {
    policy.check(mdp)?;
    let mut outcomes = Vec::new();
    let mut probs = Vec::new();
    // (state, path probability, accumulated return)
    let mut stack = vec![(mdp.initial_state(), 1.0f64, 0.0f64)];
    while let Some((s, p, g)) = stack.pop() {
        if mdp.is_terminal(s) {
            if outcomes.len() >= ENUMERATION_LIMIT {
                return Err(Error::Capacity(format!("more than {ENUMERATION_LIMIT} trajectories")));
            }
            outcomes.push(g);
            probs.push(p);
            continue;
        }
        for (a, &pa) in policy.action_probs(s).iter().enumerate() {
            if pa > 0.0 {
                for t in mdp.transitions(s, a) {
                    stack.push((t.next, p * pa * t.prob, g + t.reward));
                }
            }
        }
    }
    let dist = DiscreteDistribution::new(outcomes, probs)?;
    certainty_equivalent(&dist, ra)
}

/// Size parameters for [`random_layered_mdp`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RandomMdpShape {
    pub steps: usize,
    pub states_per_layer: usize,
    pub max_actions: usize,
    pub max_successors: usize,
    pub reward_scale: f64,
}

impl Default for RandomMdpShape {
    fn default() -> Self {
        Self { steps: 3, states_per_layer: 3, max_actions: 3, max_successors: 3, reward_scale: 1.0 }
    }
}

/// A random MDP whose states are arranged in `steps` layers plus one terminal state.
///
/// Layer 0 holds only the initial state. Each state gets between one and
/// `max_actions` available actions, each with between one and
/// `max_successors` successors in the next layer and uniform rewards in
/// `[−reward_scale, reward_scale]`.
pub fn random_layered_mdp(seed: u64, shape: RandomMdpShape) -> Result<FiniteMdp> {
    let RandomMdpShape { steps, states_per_layer, max_actions, max_successors, reward_scale } = shape;
    if steps == 0 || states_per_layer == 0 || max_actions == 0 || max_successors == 0 {
        return input("random MDP shape parameters must be positive");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers: Vec<Vec<usize>> = vec![vec![0]];
    let mut next_id = 1;
    for _ in 1..steps {
        let width = rng.random_range(1..=states_per_layer);
        layers.push((next_id..next_id + width).collect());
        next_id += width;
    }
    let terminal = next_id;
    layers.push(vec![terminal]);

    let mut transitions = Vec::new();
    for t in 0..steps {
        let next_layer = &layers[t + 1];
        for &s in &layers[t] {
            let n_actions = rng.random_range(1..=max_actions);
            for a in 0..n_actions {
                let k = rng.random_range(1..=max_successors.min(next_layer.len()));
                let mut pool = next_layer.clone();
                let mut chosen = Vec::with_capacity(k);
                for _ in 0..k {
                    chosen.push(pool.swap_remove(rng.random_range(0..pool.len())));
                }
                let weights: Vec<f64> = (0..k).map(|_| 0.1 + rng.random::<f64>()).collect();
                let total: f64 = weights.iter().sum();
                for (next, w) in chosen.into_iter().zip(weights) {
                    transitions.push(TransitionSpec {
                        state: s,
                        action: a,
                        next,
                        prob: w / total,
                        reward: reward_scale * (2.0 * rng.random::<f64>() - 1.0),
                    });
                }
            }
        }
    }
    FiniteMdp::new(MdpSpec {
        num_states: terminal + 1,
        num_actions: max_actions,
        initial_state: 0,
        horizon: steps,
        terminal: vec![terminal],
        transitions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ra(a: f64) -> RiskAversion {
        RiskAversion::new(a).unwrap()
    }

    /// One decision state, two arms into a terminal state: arm 0 pays 0, arm 1 pays ±1.
    fn bandit() -> FiniteMdp {
        FiniteMdp::new(MdpSpec {
            num_states: 3,
            num_actions: 2,
            initial_state: 0,
            horizon: 1,
            terminal: vec![1, 2],
            transitions: vec![
                TransitionSpec { state: 0, action: 0, next: 1, prob: 1.0, reward: 0.0 },
                TransitionSpec { state: 0, action: 1, next: 1, prob: 0.5, reward: 1.0 },
                TransitionSpec { state: 0, action: 1, next: 2, prob: 0.5, reward: -1.0 },
            ],
        })
        .unwrap()
    }

    fn chain(rewards: &[f64]) -> FiniteMdp {
        let n = rewards.len();
        FiniteMdp::new(MdpSpec {
            num_states: n + 1,
            num_actions: 1,
            initial_state: 0,
            horizon: n,
            terminal: vec![n],
            transitions: rewards
                .iter()
                .enumerate()
                .map(|(s, &r)| TransitionSpec { state: s, action: 0, next: s + 1, prob: 1.0, reward: r })
                .collect(),
        })
        .unwrap()
    }

    #[test]
    fn trajectories() {
        let one = chain(&[5.0]);
        let tr = sample_trajectory(&one, &TabularPolicy::uniform(&one), 7).unwrap();
        assert_eq!(tr.steps.len(), 1);
        assert_eq!(tr.total_return, 5.0);

        let two = chain(&[1.0, 2.0]);
        assert_eq!(sample_trajectory(&two, &TabularPolicy::uniform(&two), 1).unwrap().total_return, 3.0);

        let b = bandit();
        let pol = TabularPolicy::uniform(&b);
        for seed in 0..20 {
            assert_eq!(sample_trajectory(&b, &pol, seed).unwrap(), sample_trajectory(&b, &pol, seed).unwrap());
        }
    }

    #[test]
    fn bandit_solutions() {
        let b = bandit();
        let neutral = entropic_value_iteration(&b, RiskAversion::neutral()).unwrap();
        assert_eq!(neutral.q_star[0], vec![0.0, 0.0]);
        assert_eq!(neutral.greedy_actions[0], 0);

        let averse = entropic_value_iteration(&b, ra(1.0)).unwrap();
        assert_eq!(averse.greedy_actions[0], 0);
        assert_eq!(averse.v_star[0], 0.0);
        assert!((averse.q_star[0][1] + 0.433781).abs() < 1e-6);

        let rn = risk_neutral_value_iteration(&b).unwrap();
        assert_eq!(rn.q_star[0], vec![0.0, 0.0]);
    }

    #[test]
    fn policy_evaluation_examples() {
        let b = bandit();
        let coin_only = TabularPolicy::deterministic(&b, &[1, 0, 0]).unwrap();
        let v = entropic_policy_evaluation(&b, &coin_only, ra(1.0)).unwrap();
        assert!((v[0] + 1.0f64.cosh().ln()).abs() < 1e-14);
        assert!(v[1] == 0.0 && v[2] == 0.0);

        let c = chain(&[0.5, -1.0, 2.0]);
        let pol = TabularPolicy::uniform(&c);
        for a in [0.0, 1.0, 30.0] {
            let v = entropic_policy_evaluation(&c, &pol, ra(a)).unwrap();
            assert!((v[0] - 1.5).abs() < 1e-12);
            assert!((entropic_return_ce(&c, &pol, ra(a)).unwrap() - 1.5).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_mdp_is_risk_free() {
        let c = chain(&[1.0, 2.0, -0.5]);
        let a = entropic_value_iteration(&c, ra(5.0)).unwrap();
        let n = risk_neutral_value_iteration(&c).unwrap();
        for s in 0..c.num_states() {
            assert!((a.v_star[s] - n.v_star[s]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_cycles_and_dead_ends() {
        let cyc = MdpSpec {
            num_states: 2,
            num_actions: 1,
            initial_state: 0,
            horizon: 5,
            terminal: vec![],
            transitions: vec![
                TransitionSpec { state: 0, action: 0, next: 1, prob: 1.0, reward: 0.0 },
                TransitionSpec { state: 1, action: 0, next: 0, prob: 1.0, reward: 0.0 },
            ],
        };
        assert!(matches!(FiniteMdp::new(cyc), Err(Error::Model(_))));
        let dead = MdpSpec {
            num_states: 2,
            num_actions: 1,
            initial_state: 0,
            horizon: 5,
            terminal: vec![],
            transitions: vec![TransitionSpec { state: 0, action: 0, next: 1, prob: 1.0, reward: 0.0 }],
        };
        assert!(FiniteMdp::new(dead).is_err());
        let too_long = chain(&[1.0, 1.0]).to_spec();
        assert!(FiniteMdp::new(MdpSpec { horizon: 1, ..too_long }).is_err());
    }

    #[test]
    fn json_round_trip() {
        let mdp = random_layered_mdp(3, RandomMdpShape::default()).unwrap();
        let back = FiniteMdp::from_json(&mdp.to_json()).unwrap();
        assert_eq!(mdp, back);
        let via_serde: FiniteMdp = serde_json::from_str(&serde_json::to_string(&mdp).unwrap()).unwrap();
        assert_eq!(mdp, via_serde);
    }

    #[test]
    fn enumeration_guard() {
        // 2^21 trajectories
        let mut transitions = Vec::new();
        for s in 0..21 {
            transitions.push(TransitionSpec { state: s, action: 0, next: s + 1, prob: 0.5, reward: 1.0 });
            transitions.push(TransitionSpec { state: s, action: 0, next: 22 + s, prob: 0.5, reward: 0.0 });
        }
        // side states 22..43 each lead on to s+1 deterministically
        for s in 0..21 {
            transitions.push(TransitionSpec { state: 22 + s, action: 0, next: s + 1, prob: 1.0, reward: 0.0 });
        }
        let mdp = FiniteMdp::new(MdpSpec {
            num_states: 43,
            num_actions: 1,
            initial_state: 0,
            horizon: 42,
            terminal: vec![21],
            transitions,
        })
        .unwrap();
        let err = entropic_return_ce(&mdp, &TabularPolicy::uniform(&mdp), ra(1.0)).unwrap_err();
        assert!(matches!(err, Error::Capacity(_)));
    }
}
