//! TD(0) value training with a hard-synced target network, and the
//! exponential policy objective `E[α⁻¹ exp{−α(r + V(s′) − V(s))}]`.
//!
//! Random streams are derived from the run seed with ChaCha8 stream ids:
//! 0 initialises the value net, 1 the policy net, 2 drives batch sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::mlp::{ForwardCache, Mlp};
use super::optim::{clip_gradients, lr_scale, AdamState, TrainConfig};
use crate::entropic::RiskAversion;
use crate::error::{input, Error, Result};
use crate::losses::LossKind;
use crate::record::RunRecord;

/// Result of one transition from an explicit state and noise draw.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Outcome<S> {
    pub next: S,
    pub reward: f64,
    /// `∂r/∂a` at the taken action.
    pub reward_grad: f64,
    pub terminal: bool,
}

/// A one-dimensional-action environment whose next state does not depend on the action.
///
/// Noise is drawn separately from the transition so that the same draw can be
/// replayed under different actions.
pub trait Environment {
    type State: Copy;
    fn feature_dim(&self) -> usize;
    fn features(&self, s: &Self::State, out: &mut [f64]);
    /// A state from the training distribution over non-terminal states.
    fn sample_state<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::State;
    fn sample_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> f64;
    fn step(&self, s: &Self::State, action: f64, noise: f64) -> Outcome<Self::State>;
}

/// Where actions come from during value training.
#[derive(Clone, Copy)]
pub enum Actor<'a> {
    Net(&'a Mlp),
    /// Any function of the state features.
    Fixed(&'a dyn Fn(&[f64]) -> f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Batch<S> {
    pub states: Vec<S>,
    pub noise: Vec<f64>,
}

pub fn sample_batch<E: Environment, R: Rng + ?Sized>(env: &E, size: usize, rng: &mut R) -> Batch<E::State> {
    let mut states = Vec::with_capacity(size);
    let mut noise = Vec::with_capacity(size);
    for _ in 0..size {
        states.push(env.sample_state(rng));
        noise.push(env.sample_noise(rng));
    }
    Batch { states, noise }
}

#[derive(Default)]
struct Scratch {
    xs: Vec<f64>,
    xn: Vec<f64>,
    cache: ForwardCache,
    cache_aux: ForwardCache,
    actions: Vec<f64>,
    upstream: Vec<f64>,
}

impl Scratch {
    fn load<E: Environment>(&mut self, env: &E, batch: &Batch<E::State>, actor: Actor<'_>) -> Result<()> {
        let d = env.feature_dim();
        let n = batch.states.len();
        self.xs.resize(n * d, 0.0);
        for (s, row) in batch.states.iter().zip(self.xs.chunks_exact_mut(d)) {
            env.features(s, row);
        }
        self.actions.clear();
        match actor {
            Actor::Net(p) => {
                p.forward_batch(&self.xs, n, &mut self.cache_aux)?;
                self.actions.extend_from_slice(self.cache_aux.outputs());
            }
            Actor::Fixed(f) => self.actions.extend(self.xs.chunks_exact(d).map(f)),
        }
        Ok(())
    }

    fn load_next<E: Environment>(&mut self, env: &E, outcomes: &[Outcome<E::State>]) {
        let d = env.feature_dim();
        self.xn.resize(outcomes.len() * d, 0.0);
        for (o, row) in outcomes.iter().zip(self.xn.chunks_exact_mut(d)) {
            env.features(&o.next, row);
        }
    }
}

fn check_dims<E: Environment>(env: &E, net: &Mlp) -> Result<()> {
    if net.input_dim() != env.feature_dim() {
        return input(format!("network takes {} inputs but the environment has {} features", net.input_dim(), env.feature_dim()));
    }
    Ok(())
}

fn value_step<E: Environment>(
    env: &E,
    batch: &Batch<E::State>,
    actor: Actor<'_>,
    net: &Mlp,
    target_net: &Mlp,
    kind: LossKind,
    ra: RiskAversion,
    sc: &mut Scratch,
    grad: &mut [f64],
) -> Result<f64> {
    let n = batch.states.len();
    sc.load(env, batch, actor)?;
    let outcomes: Vec<_> = batch
        .states
        .iter()
        .zip(&batch.noise)
        .zip(&sc.actions)
        .map(|((s, &z), &a)| env.step(s, a, z))
        .collect();
    sc.load_next(env, &outcomes);
    target_net.forward_batch(&sc.xn, n, &mut sc.cache_aux)?;
    net.forward_batch(&sc.xs, n, &mut sc.cache)?;
    let inv_n = 1.0 / n as f64;
    let mut loss = 0.0;
    sc.upstream.clear();
    for (i, o) in outcomes.iter().enumerate() {
        let boot = if o.terminal { 0.0 } else { sc.cache_aux.outputs()[i] };
        let eval = kind.evaluate(sc.cache.outputs()[i], o.reward + boot, ra);
        loss += eval.value * inv_n;
        sc.upstream.push(eval.grad * inv_n);
    }
    grad.iter_mut().for_each(|g| *g = 0.0);
    net.backward_batch(&mut sc.cache, &sc.upstream, grad)?;
    Ok(loss)
}

fn policy_step<E: Environment>(
    env: &E,
    batch: &Batch<E::State>,
    policy: &Mlp,
    value_net: &Mlp,
    alpha: f64,
    sc: &mut Scratch,
    grad: &mut [f64],
) -> Result<f64> {
    let n = batch.states.len();
    sc.load(env, batch, Actor::Fixed(&|_| 0.0))?;
    policy.forward_batch(&sc.xs, n, &mut sc.cache)?;
    let outcomes: Vec<_> = batch
        .states
        .iter()
        .zip(&batch.noise)
        .zip(sc.cache.outputs())
        .map(|((s, &z), &a)| env.step(s, a, z))
        .collect();
    sc.load_next(env, &outcomes);
    value_net.forward_batch(&sc.xn, n, &mut sc.cache_aux)?;
    let v_next: Vec<f64> = outcomes.iter().zip(sc.cache_aux.outputs()).map(|(o, &v)| if o.terminal { 0.0 } else { v }).collect();
    value_net.forward_batch(&sc.xs, n, &mut sc.cache_aux)?;
    let inv_n = 1.0 / n as f64;
    let mut objective = 0.0;
    sc.upstream.clear();
    for (i, o) in outcomes.iter().enumerate() {
        let e = (-alpha * (o.reward + v_next[i] - sc.cache_aux.outputs()[i])).exp();
        objective += e / alpha * inv_n;
        sc.upstream.push(-e * o.reward_grad * inv_n);
    }
    grad.iter_mut().for_each(|g| *g = 0.0);
    policy.backward_batch(&mut sc.cache, &sc.upstream, grad)?;
    Ok(objective)
}

/// Mean value loss over a fixed batch and its gradient in the value-net parameters.
///
/// Targets are `r + V_target(s′)`, with 0 in place of `V_target` at terminal states.
pub fn value_objective<E: Environment>(
    env: &E,
    batch: &Batch<E::State>,
    actor: Actor<'_>,
    net: &Mlp,
    target_net: &Mlp,
    kind: LossKind,
    ra: RiskAversion,
) -> Result<(f64, Vec<f64>)> {
    check_dims(env, net)?;
    let mut grad = vec![0.0; net.num_params()];
    let loss = value_step(env, batch, actor, net, target_net, kind, ra, &mut Scratch::default(), &mut grad)?;
    Ok((loss, grad))
}

/// Monte-Carlo policy objective over a fixed batch and its gradient in the policy parameters.
pub fn policy_objective<E: Environment>(
    env: &E,
    batch: &Batch<E::State>,
    policy: &Mlp,
    value_net: &Mlp,
    ra: RiskAversion,
) -> Result<(f64, Vec<f64>)> {
    let alpha = ra.require_positive("the exponential policy objective")?;
    check_dims(env, policy)?;
    check_dims(env, value_net)?;
    let mut grad = vec![0.0; policy.num_params()];
    let obj = policy_step(env, batch, policy, value_net, alpha, &mut Scratch::default(), &mut grad)?;
    Ok((obj, grad))
}

/// Extra metrics evaluated on the record grid: `(value_net, policy_net) -> [(name, value)]`.
pub type Probe<'a> = &'a mut dyn FnMut(&Mlp, Option<&Mlp>) -> Vec<(String, f64)>;

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub value_net: Mlp,
    pub policy_net: Option<Mlp>,
    pub history: Vec<RunRecord>,
    /// Iteration of the first non-finite value loss, if any.
    pub first_nonfinite: Option<usize>,
    /// Set when parameters became non-finite and training stopped there.
    pub stopped_at: Option<usize>,
}

enum Mode<'a> {
    Value(Actor<'a>),
    Policy(&'a Mlp),
    ActorCritic,
}

/// TD(0) value training with actions from `actor`.
pub fn train_value_td0<E: Environment>(env: &E, actor: Actor<'_>, cfg: &TrainConfig, seed: u64, probe: Option<Probe<'_>>) -> Result<TrainOutcome> {
    run(env, Mode::Value(actor), cfg, seed, probe)
}

/// Policy training against a frozen value network.
pub fn train_policy<E: Environment>(env: &E, value_net: &Mlp, cfg: &TrainConfig, seed: u64, probe: Option<Probe<'_>>) -> Result<TrainOutcome> {
    check_dims(env, value_net)?;
    run(env, Mode::Policy(value_net), cfg, seed, probe)
}

/// Value and policy trained in alternation, one step each per iteration.
pub fn train_actor_critic<E: Environment>(env: &E, cfg: &TrainConfig, seed: u64, probe: Option<Probe<'_>>) -> Result<TrainOutcome> {
    run(env, Mode::ActorCritic, cfg, seed, probe)
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn run<E: Environment>(env: &E, mode: Mode<'_>, cfg: &TrainConfig, seed: u64, mut probe: Option<Probe<'_>>) -> Result<TrainOutcome> {
    cfg.validate()?;
    let trains_policy = !matches!(mode, Mode::Value(_));
    let alpha = if trains_policy { cfg.ra.require_positive("the exponential policy objective")? } else { cfg.ra.alpha() };
    let mut sizes = vec![env.feature_dim()];
    sizes.extend(&cfg.hidden);
    sizes.push(1);

    let mut value = match mode {
        Mode::Policy(v) => v.clone(),
        _ => Mlp::init(sizes.clone(), &mut stream(seed, 0))?.with_output_scale(cfg.value_output_scale()),
    };
    let mut target = value.clone();
    let mut policy = if trains_policy { Some(Mlp::init(sizes, &mut stream(seed, 1))?) } else { None };
    let mut rng = stream(seed, 2);
    let mut v_adam = AdamState::new(value.num_params(), cfg.value_lr);
    let mut p_adam = policy.as_ref().map(|p| AdamState::new(p.num_params(), cfg.policy_lr));
    let mut v_grad = vec![0.0; value.num_params()];
    let mut p_grad = vec![0.0; policy.as_ref().map_or(0, Mlp::num_params)];
    let mut sc = Scratch::default();

    let mut out = TrainOutcome { value_net: value.clone(), policy_net: None, history: Vec::new(), first_nonfinite: None, stopped_at: None };
    let rec = |it: usize, name: &str, v: f64| RunRecord::new(seed, it as u64, cfg.kind, cfg.ra.alpha(), name, v);

    for it in 0..cfg.total_iters {
        let scale = lr_scale(it, cfg);
        let on_grid = cfg.record_every > 0 && it % cfg.record_every == 0;

        if !matches!(mode, Mode::Policy(_)) {
            let batch = sample_batch(env, cfg.batch_size, &mut rng);
            let actor = match (&mode, &policy) {
                (Mode::Value(a), _) => *a,
                (_, Some(p)) => Actor::Net(p),
                _ => unreachable!("actor-critic always has a policy"),
            };
            let loss = value_step(env, &batch, actor, &value, &target, cfg.kind, cfg.ra, &mut sc, &mut v_grad)?;
            if !loss.is_finite() {
                if cfg.fail_fast {
                    return Err(Error::Diverged { kind: cfg.kind, episode: it });
                }
                if out.first_nonfinite.is_none() {
                    out.first_nonfinite = Some(it);
                    out.history.push(rec(it, "loss", loss));
                }
            }
            if on_grid && loss.is_finite() {
                out.history.push(rec(it, "loss", loss));
            }
            clip_gradients(&mut v_grad, cfg.grad_value_clip, cfg.grad_norm_clip);
            v_adam.step(value.params_mut(), &v_grad, scale)?;
            if (it + 1) % cfg.target_sync_period == 0 {
                target.copy_from(&value);
            }
        }

        if let (Some(p), Some(adam)) = (policy.as_mut(), p_adam.as_mut()) {
            let batch = sample_batch(env, cfg.batch_size, &mut rng);
            let obj = policy_step(env, &batch, p, &value, alpha, &mut sc, &mut p_grad)?;
            if on_grid {
                out.history.push(rec(it, "policy_objective", obj));
            }
            clip_gradients(&mut p_grad, cfg.grad_value_clip, cfg.grad_norm_clip);
            adam.step(p.params_mut(), &p_grad, scale)?;
        }

        if on_grid {
            if let Some(pr) = probe.as_mut() {
                for (name, v) in pr(&value, policy.as_ref()) {
                    out.history.push(rec(it, &name, v));
                }
            }
        }
        if !value.is_finite() || policy.as_ref().is_some_and(|p| !p.is_finite()) {
            if cfg.fail_fast {
                return Err(Error::Diverged { kind: cfg.kind, episode: it });
            }
            out.history.push(rec(it, "loss", f64::NAN));
            out.first_nonfinite.get_or_insert(it);
            out.stopped_at = Some(it);
            break;
        }
    }
    if out.stopped_at.is_none() {
        if let Some(pr) = probe.as_mut() {
            for (name, v) in pr(&value, policy.as_ref()) {
                out.history.push(rec(cfg.total_iters, &name, v));
            }
        }
    }
    out.value_net = value;
    out.policy_net = policy;
    Ok(out)
}
