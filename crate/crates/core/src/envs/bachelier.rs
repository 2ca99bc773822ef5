//! Discrete-time Bachelier market: `S_{t+1} = S_t + Z_{t+1}`, `Z ~ N(μ, σ²)`.
//!
//! The agent holds `a_t` units over each step and earns `a_t Z_{t+1}`. Two
//! variants add a term at the final step: a quadratic penalty
//! `−½(S_T − S₀)²`, or the short call payoff `−max(S_T − K, 0)`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::entropic::RiskAversion;
use crate::error::{input, Result};
use crate::nn::{Environment, Outcome};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BachelierParams {
    pub mu: f64,
    pub sigma: f64,
    pub horizon: usize,
    pub s0: f64,
}

impl BachelierParams {
    pub fn new(mu: f64, sigma: f64, horizon: usize, s0: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return input(format!("sigma must be positive and finite, got {sigma}"));
        }
        if horizon == 0 {
            return input("horizon must be at least one step");
        }
        if !(mu.is_finite() && s0.is_finite()) {
            return input("drift and initial price must be finite");
        }
        Ok(Self { mu, sigma, horizon, s0 })
    }

    /// `σ = 0.2/√10`, `T = 10`, `S₀ = 1` with the given drift.
    pub fn reference(mu: f64) -> Self {
        Self { mu, sigma: 0.2 / 10f64.sqrt(), horizon: 10, s0: 1.0 }
    }

    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum TradingRewardSpec {
    PureTrading,
    QuadraticTerminal,
    CallHedging { strike: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarketState {
    pub t: usize,
    pub price: f64,
}

impl MarketState {
    pub fn initial(params: &BachelierParams) -> Self {
        Self { t: 0, price: params.s0 }
    }

    pub fn is_terminal(&self, params: &BachelierParams) -> bool {
        self.t >= params.horizon
    }
}

/// Deterministic part of a step given the price increment `z`.
pub fn bachelier_transition(state: MarketState, action: f64, z: f64, params: &BachelierParams, spec: TradingRewardSpec) -> (MarketState, f64) {
    let next = MarketState { t: state.t + 1, price: state.price + z };
    let mut reward = action * z;
    if next.t == params.horizon {
        match spec {
            TradingRewardSpec::PureTrading => {}
            TradingRewardSpec::QuadraticTerminal => {
                let x = next.price - params.s0;
                reward -= 0.5 * x * x;
            }
            TradingRewardSpec::CallHedging { strike } => reward -= (next.price - strike).max(0.0),
        }
    }
    (next, reward)
}

pub fn bachelier_step<R: Rng + ?Sized>(
    state: MarketState,
    action: f64,
    params: &BachelierParams,
    spec: TradingRewardSpec,
    rng: &mut R,
) -> Result<(MarketState, f64)> {
    if state.is_terminal(params) {
        return input(format!("cannot step from terminal time {}", state.t));
    }
    let z = params.mu + params.sigma * rng.sample::<f64, _>(StandardNormal);
    Ok(bachelier_transition(state, action, z, params, spec))
}

/// Optimal constant position `μ/(ασ²)` and value `μ²(T − t)/(2ασ²)` without a terminal term.
pub fn analytic_gaussian_solution(t: usize, params: &BachelierParams, ra: RiskAversion) -> Result<(f64, f64)> {
    let alpha = ra.require_positive("the pure trading solution")?;
    let s2 = params.variance();
    let remaining = params.horizon.saturating_sub(t) as f64;
    Ok((params.mu / (alpha * s2), params.mu * params.mu * remaining / (2.0 * alpha * s2)))
}

/// Optimal position `S_t − S₀` and value `−½(S_t − S₀)² + (T − t) log(1 − ασ²)/(2α)` under the quadratic penalty.
pub fn analytic_quadratic_solution(t: usize, price: f64, params: &BachelierParams, ra: RiskAversion) -> Result<(f64, f64)> {
    let alpha = ra.require_positive("the quadratic penalty solution")?;
    if params.mu != 0.0 {
        return input(format!("the quadratic penalty solution assumes zero drift, got {}", params.mu));
    }
    let a_s2 = alpha * params.variance();
    if a_s2 >= 1.0 {
        return input(format!("alpha * sigma^2 = {a_s2} must be below 1 for the moment generating function to exist"));
    }
    let x = price - params.s0;
    let remaining = params.horizon.saturating_sub(t) as f64;
    Ok((x, -0.5 * x * x + remaining * (-a_s2).ln_1p() / (2.0 * alpha)))
}

/// Risk-neutral at-the-money call price `σ√(T/2π)`.
pub fn bachelier_call_price(params: &BachelierParams) -> Result<f64> {
    if params.mu != 0.0 {
        return input(format!("the closed-form call price assumes zero drift, got {}", params.mu));
    }
    Ok(params.sigma * (params.horizon as f64 / (2.0 * std::f64::consts::PI)).sqrt())
}

/// Which closed-form value function a probe compares against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnalyticValue {
    Gaussian,
    Quadratic,
}

impl AnalyticValue {
    pub fn value(self, s: &MarketState, params: &BachelierParams, ra: RiskAversion) -> Result<f64> {
        match self {
            AnalyticValue::Gaussian => analytic_gaussian_solution(s.t, params, ra).map(|x| x.1),
            AnalyticValue::Quadratic => analytic_quadratic_solution(s.t, s.price, params, ra).map(|x| x.1),
        }
    }

    pub fn action(self, s: &MarketState, params: &BachelierParams, ra: RiskAversion) -> Result<f64> {
        match self {
            AnalyticValue::Gaussian => analytic_gaussian_solution(s.t, params, ra).map(|x| x.0),
            AnalyticValue::Quadratic => analytic_quadratic_solution(s.t, s.price, params, ra).map(|x| x.0),
        }
    }
}

pub const PROBES_PER_LAYER: usize = 64;

/// `PROBES_PER_LAYER` prices per non-terminal time, at the mid-quantiles `(i + ½)/n` of `S_t`.
pub fn probe_states(params: &BachelierParams) -> Vec<MarketState> {
    let std_normal = Normal::standard();
    let levels: Vec<f64> =
        (0..PROBES_PER_LAYER).map(|i| std_normal.inverse_cdf((i as f64 + 0.5) / PROBES_PER_LAYER as f64)).collect();
    let mut out = Vec::with_capacity(params.horizon * PROBES_PER_LAYER);
    for t in 0..params.horizon {
        let mean = params.s0 + params.mu * t as f64;
        let sd = params.sigma * (t as f64).sqrt();
        out.extend(levels.iter().map(|q| MarketState { t, price: mean + sd * q }));
    }
    out
}

/// Root mean squared gap between `value_fn` and the closed form over `probes`.
pub fn rmse_vs_analytic(
    value_fn: impl Fn(&MarketState) -> f64,
    kind: AnalyticValue,
    params: &BachelierParams,
    ra: RiskAversion,
    probes: &[MarketState],
) -> Result<f64> {
    if probes.is_empty() {
        return input("rmse needs at least one probe state");
    }
    let mut sum = 0.0;
    for s in probes {
        let d = kind.value(s, params, ra)? - value_fn(s);
        sum += d * d;
    }
    Ok((sum / probes.len() as f64).sqrt())
}

/// The market as a learning environment. Features are `[t/T, x, x²]` with
/// `x = (S − S₀)/(σ√T)`;
/// training states draw `t` uniformly from `0..T` and `S_t` from its marginal law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradingEnv {
    pub params: BachelierParams,
    pub spec: TradingRewardSpec,
}

impl TradingEnv {
    pub fn new(params: BachelierParams, spec: TradingRewardSpec) -> Self {
        Self { params, spec }
    }

    pub fn feature_vec(&self, s: &MarketState) -> [f64; 3] {
        let p = &self.params;
        let t_max = p.horizon as f64;
        let x = (s.price - p.s0) / (p.sigma * t_max.sqrt());
        [s.t as f64 / t_max, x, x * x]
    }
}

impl Environment for TradingEnv {
    type State = MarketState;

    fn feature_dim(&self) -> usize {
        3
    }

    fn features(&self, s: &MarketState, out: &mut [f64]) {
        out.copy_from_slice(&self.feature_vec(s));
    }

    fn sample_state<R: Rng + ?Sized>(&self, rng: &mut R) -> MarketState {
        let p = &self.params;
        let t = rng.random_range(0..p.horizon);
        let xi: f64 = rng.sample(StandardNormal);
        MarketState { t, price: p.s0 + p.mu * t as f64 + p.sigma * (t as f64).sqrt() * xi }
    }

    fn sample_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.params.mu + self.params.sigma * rng.sample::<f64, _>(StandardNormal)
    }

    fn step(&self, s: &MarketState, action: f64, z: f64) -> Outcome<MarketState> {
        let (next, reward) = bachelier_transition(*s, action, z, &self.params, self.spec);
        Outcome { next, reward, reward_grad: z, terminal: next.t >= self.params.horizon }
    }
}
