//! Self-checks run by the `oracle_suite` and `grad_check` experiments.
//!
//! Every check returns record rows. A row named `pass` (or `<part>_pass`)
//! holds 1 when the check met its tolerance and 0 otherwise.

use entropic_core::envs::{BachelierParams, TradingEnv, TradingRewardSpec};
use entropic_core::losses::dilogarithm;
use entropic_core::mdp::{
    entropic_policy_evaluation, random_layered_mdp, FiniteMdp, MdpSpec, RandomMdpShape, TabularPolicy, TransitionSpec,
};
use entropic_core::nn::{policy_objective, sample_batch, value_objective, Actor, Mlp};
use entropic_core::tabular::{td0_policy_evaluation, LearningSchedule, TabularConfig};
use entropic_core::{certainty_equivalent, DiscreteDistribution, LossKind, RiskAversion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{BenchError, Row};

pub const CE_ALPHAS: [f64; 5] = [0.0, 0.1, 1.0, 10.0, 100.0];
pub const TD_TOLERANCE: f64 = 0.02;
pub const SP_MIN_GAP: f64 = 0.05;
pub const GRAD_TOLERANCE: f64 = 1e-4;
pub const DILOG_TOLERANCE: f64 = 1e-10;
/// Parameter step for network finite differences. Smaller steps lose to
/// rounding in the softplus loss value at small α.
pub const FD_STEP: f64 = 1e-5;

/// Shape of the random MDPs in the TD convergence suite.
pub const SUITE_SHAPE: RandomMdpShape =
    RandomMdpShape { steps: 3, states_per_layer: 3, max_actions: 3, max_successors: 3, reward_scale: 1.0 };

fn ra(a: f64) -> Result<RiskAversion, BenchError> {
    Ok(RiskAversion::new(a)?)
}

fn pass_row(seed: u64, kind: &str, alpha: f64, ok: bool) -> Row {
    named_pass(seed, kind, alpha, "pass", ok)
}

fn named_pass(seed: u64, kind: &str, alpha: f64, name: &str, ok: bool) -> Row {
    Row::new(seed, 0, kind, alpha, name, if ok { 1.0 } else { 0.0 })
}

fn ce(x: &[f64], p: &[f64], a: f64) -> Result<f64, BenchError> {
    Ok(certainty_equivalent(&DiscreteDistribution::new(x.to_vec(), p.to_vec())?, ra(a)?)?)
}

fn random_law(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<f64>) {
    let x = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    (x, w.iter().map(|v| v / total).collect())
}

/// Normalisation, monotonicity, translation, tower and concavity of the CE
/// on `cases` random laws, at every α in [`CE_ALPHAS`].
pub fn ce_axioms(seed: u64, cases: usize) -> Result<Vec<Row>, BenchError> {
    let mut rows = Vec::new();
    for &a in &CE_ALPHAS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = [0.0f64; 5];
        worst[0] = ce(&[0.0], &[1.0], a)?.abs();
        for _ in 0..cases {
            let n = rng.random_range(2..7);
            let (x, p) = random_law(&mut rng, n);
            let base = ce(&x, &p, a)?;

            let bumped: Vec<f64> = x.iter().map(|v| v + rng.random_range(0.0..3.0)).collect();
            worst[1] = worst[1].max(base - ce(&bumped, &p, a)?);

            let c = rng.random_range(-20.0..20.0);
            let moved: Vec<f64> = x.iter().map(|v| v + c).collect();
            worst[2] = worst[2].max((ce(&moved, &p, a)? - base - c).abs());

            // two-stage tree: first draw from (x, p), then an independent law per branch
            let mut inner = Vec::with_capacity(n);
            let (mut joint_x, mut joint_p) = (Vec::new(), Vec::new());
            for (xi, pi) in x.iter().zip(&p) {
                let m = rng.random_range(1..5);
                let (y, q) = random_law(&mut rng, m);
                inner.push(ce(&y.iter().map(|v| xi + v).collect::<Vec<_>>(), &q, a)?);
                for (yj, qj) in y.iter().zip(&q) {
                    joint_x.push(xi + yj);
                    joint_p.push(pi * qj);
                }
            }
            worst[3] = worst[3].max((ce(&inner, &p, a)? - ce(&joint_x, &joint_p, a)?).abs());

            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let ce_y = ce(&y, &p, a)?;
            for k in 0..=10 {
                let l = k as f64 / 10.0;
                let mix: Vec<f64> = x.iter().zip(&y).map(|(u, v)| l * u + (1.0 - l) * v).collect();
                worst[4] = worst[4].max(l * base + (1.0 - l) * ce_y - ce(&mix, &p, a)?);
            }
        }
        let tol = [0.0, 1e-12, 1e-10, 1e-10, 1e-10];
        let names = ["normalization_error", "monotonicity_violation", "translation_error", "tower_error", "concavity_violation"];
        for (name, w) in names.iter().zip(&worst) {
            rows.push(Row::new(seed, 0, "-", a, *name, *w));
        }
        rows.push(Row::new(seed, 0, "-", a, "cases", cases as f64));
        rows.push(pass_row(seed, "-", a, worst.iter().zip(&tol).all(|(w, t)| w <= t)));
    }
    Ok(rows)
}

/// IS-based TD(0) under the uniform policy against exact entropic evaluation.
pub fn td_convergence(mdp_seed: u64, alpha: f64, episodes: usize, schedule: LearningSchedule) -> Result<Vec<Row>, BenchError> {
    let mdp = random_layered_mdp(mdp_seed, SUITE_SHAPE)?;
    let pi = TabularPolicy::uniform(&mdp);
    let exact = entropic_policy_evaluation(&mdp, &pi, ra(alpha)?)?;
    let mut cfg = TabularConfig::new(ra(alpha)?, LossKind::ItakuraSaito, episodes, mdp_seed);
    cfg.schedule = schedule;
    let run = td0_policy_evaluation(&mdp, &pi, &cfg)?;
    let err = run
        .state
        .values
        .iter()
        .zip(&exact)
        .zip(&run.state.visit_counts)
        .filter(|(_, &n)| n > 0)
        .map(|((v, e), _)| (v - e).abs())
        .fold(0.0, f64::max);
    let unvisited = reachable(&mdp).into_iter().filter(|&s| !mdp.is_terminal(s) && run.state.visit_counts[s] == 0).count();
    Ok(vec![
        Row::new(mdp_seed, episodes as u64, "is", alpha, "max_error", err),
        Row::new(mdp_seed, episodes as u64, "is", alpha, "unvisited_states", unvisited as f64),
        pass_row(mdp_seed, "is", alpha, err <= TD_TOLERANCE && unvisited == 0),
    ])
}

/// States reachable from the initial state when every action has positive probability.
fn reachable(mdp: &FiniteMdp) -> Vec<usize> {
    let mut seen = vec![false; mdp.num_states()];
    let mut stack = vec![mdp.initial_state()];
    seen[mdp.initial_state()] = true;
    while let Some(s) = stack.pop() {
        for a in mdp.available_actions(s) {
            for t in mdp.transitions(s, a).iter().filter(|t| t.prob > 0.0) {
                if !seen[t.next] {
                    seen[t.next] = true;
                    stack.push(t.next);
                }
            }
        }
    }
    (0..mdp.num_states()).filter(|&s| seen[s]).collect()
}

/// Reward +1 with probability 3/4 and −3 otherwise, in a single step.
pub fn two_point_mdp() -> FiniteMdp {
    let t = |next, prob, reward| TransitionSpec { state: 0, action: 0, next, prob, reward };
    FiniteMdp::new(MdpSpec {
        num_states: 3,
        num_actions: 1,
        initial_state: 0,
        horizon: 1,
        terminal: vec![1, 2],
        transitions: vec![t(1, 0.75, 1.0), t(2, 0.25, -3.0)],
    })
    .expect("fixed two-point MDP is valid")
}

/// Root of `E[2δ·logistic(αδ)]` for the two-point law, by bisection.
pub fn softplus_root(alpha: f64) -> f64 {
    let mean_grad = |v: f64| {
        [(0.75, 1.0), (0.25, -3.0)].iter().map(|&(p, x): &(f64, f64)| p * 2.0 * (v - x) / (1.0 + (-alpha * (v - x)).exp())).sum::<f64>()
    };
    let (mut lo, mut hi) = (-4.0, 2.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_grad(mid) > 0.0 {
            hi = mid
        } else {
            lo = mid
        }
    }
    0.5 * (lo + hi)
}

/// SP and IS TD(0) on [`two_point_mdp`] at α = 1.
pub fn softplus_bias(seed: u64, episodes: usize, schedule: LearningSchedule) -> Result<Vec<Row>, BenchError> {
    let alpha = 1.0;
    let mdp = two_point_mdp();
    let pi = TabularPolicy::uniform(&mdp);
    let oracle = entropic_policy_evaluation(&mdp, &pi, ra(alpha)?)?[0];
    let learn = |kind| -> Result<f64, BenchError> {
        let mut cfg = TabularConfig::new(ra(alpha)?, kind, episodes, seed);
        cfg.schedule = schedule;
        Ok(td0_policy_evaluation(&mdp, &pi, &cfg)?.state.values[0])
    };
    let sp_gap = (learn(LossKind::Softplus)? - oracle).abs();
    let is_gap = (learn(LossKind::ItakuraSaito)? - oracle).abs();
    let root_gap = (softplus_root(alpha) - oracle).abs();
    let it = episodes as u64;
    Ok(vec![
        Row::new(seed, it, "sp", alpha, "oracle_gap", sp_gap),
        Row::new(seed, it, "is", alpha, "oracle_gap", is_gap),
        Row::new(seed, it, "sp", alpha, "root_gap", root_gap),
        pass_row(seed, "-", alpha, sp_gap >= SP_MIN_GAP && is_gap <= TD_TOLERANCE && root_gap >= 0.1),
    ])
}

fn rel(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Worst relative gap between a loss's analytic derivative and central differences.
pub fn loss_gradient_error(kind: LossKind, alpha: f64) -> Result<f64, BenchError> {
    let r = ra(alpha)?;
    let h = 1e-4 / alpha.max(1.0);
    let mut worst: f64 = 0.0;
    // a small target keeps EMSE's constant term from drowning the difference quotient
    let target = 0.3;
    for i in 0..=200 {
        let v = target - 5.0 + i as f64 * 0.05;
        let g = kind.evaluate(v, target, r).grad;
        let fd = (kind.evaluate(v + h, target, r).value - kind.evaluate(v - h, target, r).value) / (2.0 * h);
        worst = worst.max(rel(g, fd, 1e-3));
    }
    Ok(worst)
}

fn random_net(sizes: Vec<usize>, rng: &mut ChaCha8Rng) -> Result<Mlp, BenchError> {
    let mut net = Mlp::init(sizes, rng)?;
    for p in net.params_mut() {
        *p += 0.1 * (rng.random::<f64>() - 0.5);
    }
    Ok(net)
}

fn fd_grad(net: &Mlp, h: f64, f: impl Fn(&Mlp) -> Result<f64, BenchError>) -> Result<Vec<f64>, BenchError> {
    let mut p = net.clone();
    let mut out = Vec::with_capacity(net.num_params());
    for i in 0..net.num_params() {
        let x0 = p.params()[i];
        p.params_mut()[i] = x0 + h;
        let up = f(&p)?;
        p.params_mut()[i] = x0 - h;
        let down = f(&p)?;
        p.params_mut()[i] = x0;
        out.push((up - down) / (2.0 * h));
    }
    Ok(out)
}

fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().map(|x| x.abs()).fold(0.0, f64::max);
    a.iter().zip(b).map(|(x, y)| rel(*x, *y, 1e-3 * scale)).fold(0.0, f64::max)
}

/// MLP backward pass against central differences at 100 random probes.
pub fn mlp_gradient_error(seed: u64) -> Result<f64, BenchError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let net = random_net(vec![3, 16, 16, 1], &mut rng)?;
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let up = rng.random_range(-2.0..2.0);
        let g = net.backward(&x, up)?;
        let i = rng.random_range(0..net.num_params());
        let mut p = net.clone();
        p.params_mut()[i] += h;
        let fp = p.forward(&x)?;
        p.params_mut()[i] -= 2.0 * h;
        let fm = p.forward(&x)?;
        worst = worst.max(rel(g[i], up * (fp - fm) / (2.0 * h), 1e-3));
    }
    Ok(worst)
}

fn hedging_env() -> TradingEnv {
    TradingEnv::new(BachelierParams::reference(0.0), TradingRewardSpec::CallHedging { strike: 1.0 })
}

/// Value-loss gradient through the network on a hedging batch.
pub fn value_gradient_error(kind: LossKind, alpha: f64, seed: u64) -> Result<f64, BenchError> {
    let env = hedging_env();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let batch = sample_batch(&env, 32, &mut rng);
    let net = random_net(vec![3, 8, 8, 1], &mut rng)?;
    let target = random_net(vec![3, 8, 8, 1], &mut rng)?;
    let actor = |f: &[f64]| 0.5 + 0.1 * f[1];
    let r = ra(alpha)?;
    let (_, g) = value_objective(&env, &batch, Actor::Fixed(&actor), &net, &target, kind, r)?;
    let fd = fd_grad(&net, FD_STEP, |n| Ok(value_objective(&env, &batch, Actor::Fixed(&actor), n, &target, kind, r)?.0))?;
    Ok(max_rel(&g, &fd))
}

/// Policy-objective gradient through the network on a trading batch.
pub fn policy_gradient_error(alpha: f64, seed: u64) -> Result<f64, BenchError> {
    let env = TradingEnv::new(BachelierParams::reference(0.03), TradingRewardSpec::PureTrading);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let batch = sample_batch(&env, 32, &mut rng);
    let policy = random_net(vec![3, 8, 8, 1], &mut rng)?;
    let value = random_net(vec![3, 8, 8, 1], &mut rng)?;
    let r = ra(alpha)?;
    let (_, g) = policy_objective(&env, &batch, &policy, &value, r)?;
    let fd = fd_grad(&policy, FD_STEP, |p| Ok(policy_objective(&env, &batch, p, &value, r)?.0))?;
    Ok(max_rel(&g, &fd))
}

/// `li₂(x) = −∫₀^U u / (1 − e^{−u}) du` with `U = ln(1 − x)`, composite Simpson.
pub fn dilog_oracle(x: f64) -> f64 {
    let upper = (-x).ln_1p();
    let f = |u: f64| if u == 0.0 { 1.0 } else { u / -(-u).exp_m1() };
    let n = 20_000;
    let h = upper / n as f64;
    let mut sum = f(0.0) + f(upper);
    for i in 1..n {
        sum += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    -sum * h / 3.0
}

/// Largest absolute dilogarithm error over 1000 points in `[−10⁴, 0.99]`.
pub fn dilog_error() -> Result<f64, BenchError> {
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let x = if i < 500 { -1.0 + 1.99 * i as f64 / 499.0 } else { -(10f64.powf(4.0 * (i - 500) as f64 / 499.0)) };
        worst = worst.max((dilogarithm(x)? - dilog_oracle(x)).abs());
    }
    Ok(worst)
}

/// Loss and end-to-end value gradients of one loss kind at each α.
pub fn loss_gradients(kind: LossKind, alphas: &[f64], seed: u64) -> Result<Vec<Row>, BenchError> {
    let mut rows = Vec::new();
    let k = kind.as_str();
    for &a in alphas {
        let scalar = loss_gradient_error(kind, a)?;
        let e2e = value_gradient_error(kind, a, seed)?;
        rows.push(Row::new(seed, 0, k, a, "loss_grad_rel_error", scalar));
        rows.push(Row::new(seed, 0, k, a, "value_grad_rel_error", e2e));
        rows.push(pass_row(seed, k, a, scalar <= GRAD_TOLERANCE && e2e <= GRAD_TOLERANCE));
    }
    Ok(rows)
}

/// MLP backward, policy gradient at each α, and the dilogarithm.
pub fn network_gradients(alphas: &[f64], seed: u64) -> Result<Vec<Row>, BenchError> {
    let mlp = mlp_gradient_error(seed)?;
    let dilog = dilog_error()?;
    let mut rows = vec![
        Row::new(seed, 0, "-", 0.0, "mlp_grad_rel_error", mlp),
        named_pass(seed, "-", 0.0, "mlp_pass", mlp <= GRAD_TOLERANCE),
        Row::new(seed, 0, "-", 0.0, "dilog_abs_error", dilog),
        named_pass(seed, "-", 0.0, "dilog_pass", dilog <= DILOG_TOLERANCE),
    ];
    for &a in alphas.iter().filter(|a| **a > 0.0) {
        let e = policy_gradient_error(a, seed)?;
        rows.push(Row::new(seed, 0, "-", a, "policy_grad_rel_error", e));
        rows.push(named_pass(seed, "-", a, "policy_pass", e <= GRAD_TOLERANCE));
    }
    Ok(rows)
}
