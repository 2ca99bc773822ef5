//! Tabular stochastic-approximation learners.
//!
//! Each update moves an entry against the chosen loss's gradient in the TD
//! error: `v ← v − η·∂loss(v, target)`. For the Itakura-Saito loss this is
//! `v ← v − η α⁻¹ (e^{α(v − target)} − 1)`, whose fixed point is the
//! entropic certainty equivalent of the target.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::entropic::RiskAversion;
use crate::error::{input, Error, Result};
use crate::losses::LossKind;
use crate::mdp::{sample_index, sample_index_by, FiniteMdp, TabularPolicy};
use crate::record::RunRecord;

/// Step-size rule, indexed by the per-entry visit count `k` (starting at 0).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum LearningSchedule {
    Constant(f64),
    /// `η_k = c / (1 + k·decay)`; Robbins–Monro when `decay > 0`.
    Harmonic { c: f64, decay: f64 },
}

impl Default for LearningSchedule {
    fn default() -> Self {
        LearningSchedule::Harmonic { c: 0.5, decay: 1e-2 }
    }
}

impl LearningSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LearningSchedule::Constant(eta) if eta > 0.0 && eta.is_finite() => Ok(()),
            LearningSchedule::Harmonic { c, decay } if c > 0.0 && c.is_finite() && decay >= 0.0 && decay.is_finite() => {
                Ok(())
            }
            other => input(format!("invalid learning schedule {other:?}")),
        }
    }

    #[inline]
    pub fn eta(&self, k: u64) -> f64 {
        match *self {
            LearningSchedule::Constant(eta) => eta,
            LearningSchedule::Harmonic { c, decay } => c / (1.0 + k as f64 * decay),
        }
    }
}

/// One stochastic-approximation step on a single table entry.
pub fn sa_update(current: f64, target: f64, ra: RiskAversion, eta: f64, kind: LossKind) -> Result<f64> {
    if !(eta > 0.0) {
        return input(format!("step size must be positive, got {eta}"));
    }
    let next = current - eta * kind.evaluate(current, target, ra).grad;
    if next.is_finite() {
        Ok(next)
    } else {
        Err(Error::NonFinite { kind })
    }
}

/// Learned state values with visit counts; terminal entries stay at 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabularValueState {
    pub values: Vec<f64>,
    pub visit_counts: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TabularConfig {
    pub ra: RiskAversion,
    pub kind: LossKind,
    pub schedule: LearningSchedule,
    pub episodes: usize,
    pub seed: u64,
    /// Emit a record every this many episodes; 0 disables recording.
    pub record_every: usize,
}

impl TabularConfig {
    pub fn new(ra: RiskAversion, kind: LossKind, episodes: usize, seed: u64) -> Self {
        Self { ra, kind, schedule: LearningSchedule::default(), episodes, seed, record_every: 0 }
    }

    fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if self.ra.alpha() < 0.0 {
            return input("learners require a non-negative risk aversion");
        }
        Ok(())
    }

    /// MSE ignores `α`.
    fn effective_ra(&self) -> RiskAversion {
        if self.kind == LossKind::Mse {
            RiskAversion::neutral()
        } else {
            self.ra
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TdRun {
    pub state: TabularValueState,
    /// `v_initial` records every `record_every` episodes.
    pub history: Vec<RunRecord>,
}

/// TD(0) evaluation of `policy` by online stochastic approximation along sampled episodes.
pub fn td0_policy_evaluation(mdp: &FiniteMdp, policy: &TabularPolicy, cfg: &TabularConfig) -> Result<TdRun> {
    cfg.validate()?;
    let ra = cfg.effective_ra();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut values = vec![0.0; mdp.num_states()];
    let mut visits = vec![0u64; mdp.num_states()];
    let mut history = Vec::new();
    let s0 = mdp.initial_state();
    for episode in 0..cfg.episodes {
        let mut s = s0;
        while !mdp.is_terminal(s) {
            let a = sample_index(policy.action_probs(s), &mut rng)
                .ok_or_else(|| Error::Input(format!("policy row {s} has no mass")))?;
            let row = mdp.transitions(s, a);
            let t = row[sample_index_by(row.len(), |i| row[i].prob, &mut rng)
                .ok_or_else(|| Error::Input(format!("action {a} unavailable in state {s}")))?];
            let target = t.reward + values[t.next];
            let eta = cfg.schedule.eta(visits[s]);
            values[s] = sa_update(values[s], target, ra, eta, cfg.kind)
                .map_err(|_| Error::Diverged { kind: cfg.kind, episode })?;
            visits[s] += 1;
            s = t.next;
        }
        if cfg.record_every > 0 && (episode + 1) % cfg.record_every == 0 {
            history.push(RunRecord::new(cfg.seed, episode as u64 + 1, cfg.kind, cfg.ra.alpha(), "v_initial", values[s0]));
        }
    }
    Ok(TdRun { state: TabularValueState { values, visit_counts: visits }, history })
}

#[derive(Clone, Debug, PartialEq)]
pub struct QRun {
    /// `−∞` marks unavailable actions; terminal rows are 0.
    pub q: Vec<Vec<f64>>,
    pub visit_counts: Vec<Vec<u64>>,
    pub greedy: TabularPolicy,
    pub greedy_actions: Vec<usize>,
    pub steps: u64,
    pub history: Vec<RunRecord>,
}

/// Q-learning with bootstrap target `r + max_{a′} Q(s′, a′)` under an ε-greedy behaviour policy.
pub fn entropic_q_learning(mdp: &FiniteMdp, cfg: &TabularConfig, exploration_epsilon: f64) -> Result<QRun> {
    cfg.validate()?;
    if !(exploration_epsilon > 0.0 && exploration_epsilon <= 1.0) {
        return input(format!("exploration epsilon must be in (0, 1], got {exploration_epsilon}"));
    }
    let ra = cfg.effective_ra();
    let (n, m) = (mdp.num_states(), mdp.num_actions());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut q: Vec<Vec<f64>> = (0..n)
        .map(|s| {
            (0..m)
                .map(|a| if mdp.is_terminal(s) || mdp.is_available(s, a) { 0.0 } else { f64::NEG_INFINITY })
                .collect()
        })
        .collect();
    let mut visits = vec![vec![0u64; m]; n];
    let mut history = Vec::new();
    let mut steps = 0u64;
    let s0 = mdp.initial_state();
    let mut avail = Vec::with_capacity(m);
    for episode in 0..cfg.episodes {
        let mut s = s0;
        while !mdp.is_terminal(s) {
            avail.clear();
            avail.extend(mdp.available_actions(s));
            let a = if rng.random::<f64>() < exploration_epsilon {
                avail[rng.random_range(0..avail.len())]
            } else {
                argmax(&q[s])
            };
            let row = mdp.transitions(s, a);
            let t = row[sample_index_by(row.len(), |i| row[i].prob, &mut rng).expect("available action")];
            let next_best = if mdp.is_terminal(t.next) { 0.0 } else { q[t.next][argmax(&q[t.next])] };
            let eta = cfg.schedule.eta(visits[s][a]);
            q[s][a] = sa_update(q[s][a], t.reward + next_best, ra, eta, cfg.kind)
                .map_err(|_| Error::Diverged { kind: cfg.kind, episode })?;
            visits[s][a] += 1;
            steps += 1;
            s = t.next;
        }
        if cfg.record_every > 0 && (episode + 1) % cfg.record_every == 0 {
            let v0 = q[s0][argmax(&q[s0])];
            history.push(RunRecord::new(cfg.seed, episode as u64 + 1, cfg.kind, cfg.ra.alpha(), "v_initial", v0));
        }
    }
    let greedy_actions: Vec<usize> = q.iter().map(|row| argmax(row)).collect();
    let greedy = TabularPolicy::deterministic(mdp, &greedy_actions)?;
    Ok(QRun { q, visit_counts: visits, greedy, greedy_actions, steps, history })
}

/// First index of the maximum; `−∞` entries are never preferred over finite ones.
fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (a, &x) in row.iter().enumerate().skip(1) {
        if x > row[best] {
            best = a;
        }
    }
    best
}
