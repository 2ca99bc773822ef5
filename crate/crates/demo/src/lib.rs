//! WebAssembly bindings behind `www/index.html`.
//!
//! Each export has a plain Rust twin returning `Result<_, String>` so that
//! the numerics are testable off the browser.

use entropic_core::mdp::{FiniteMdp, MdpSpec, TabularPolicy, TransitionSpec};
use entropic_core::tabular::{td0_policy_evaluation, TabularConfig};
use entropic_core::{certainty_equivalent, DiscreteDistribution, LossKind, RiskAversion};
use wasm_bindgen::prelude::*;

fn ra(alpha: f64) -> Result<RiskAversion, String> {
    RiskAversion::new(alpha).map_err(|e| e.to_string())
}

fn law(outcomes: Vec<f64>, probs: Vec<f64>) -> Result<DiscreteDistribution, String> {
    DiscreteDistribution::new(outcomes, probs).map_err(|e| e.to_string())
}

/// `n` TD errors on `[lo, hi]` followed by the MSE, EMSE, SP and IS losses
/// at each, concatenated: `5n` numbers.
pub fn loss_curves_impl(alpha: f64, lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, String> {
    let r = ra(alpha)?;
    if n < 2 || !(hi > lo) {
        return Err("need n >= 2 and hi > lo".into());
    }
    let deltas: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let mut out = deltas.clone();
    for kind in LossKind::ALL {
        // target 0, so the prediction equals δ
        out.extend(deltas.iter().map(|&d| kind.evaluate(d, 0.0, r).value));
    }
    Ok(out)
}

/// `n` risk aversions on `[0, alpha_max]` followed by the CE of the law at each.
pub fn ce_vs_alpha_impl(outcomes: Vec<f64>, probs: Vec<f64>, alpha_max: f64, n: usize) -> Result<Vec<f64>, String> {
    let dist = law(outcomes, probs)?;
    if n < 2 || !(alpha_max > 0.0) {
        return Err("need n >= 2 and alpha_max > 0".into());
    }
    let alphas: Vec<f64> = (0..n).map(|i| alpha_max * i as f64 / (n - 1) as f64).collect();
    let mut out = alphas.clone();
    for &a in &alphas {
        out.push(certainty_equivalent(&dist, ra(a)?).map_err(|e| e.to_string())?);
    }
    Ok(out)
}

/// TD(0) on a one-step problem whose reward follows the given law.
///
/// Returns `[ce, fixed_point, v_1, v_2, ...]`: the exact CE, the value the
/// chosen loss settles on in expectation, then the estimate every
/// `episodes / points` episodes.
pub fn sa_trace_impl(
    kind: &str,
    alpha: f64,
    outcomes: Vec<f64>,
    probs: Vec<f64>,
    episodes: usize,
    points: usize,
    seed: u64,
) -> Result<Vec<f64>, String> {
    let kind: LossKind = kind.parse().map_err(|e: entropic_core::Error| e.to_string())?;
    let r = ra(alpha)?;
    let dist = law(outcomes.clone(), probs.clone())?;
    let n = outcomes.len();
    let transitions = outcomes
        .iter()
        .zip(&probs)
        .enumerate()
        .map(|(i, (&reward, &prob))| TransitionSpec { state: 0, action: 0, next: i + 1, prob, reward })
        .collect();
    let mdp = FiniteMdp::new(MdpSpec {
        num_states: n + 1,
        num_actions: 1,
        initial_state: 0,
        horizon: 1,
        terminal: (1..=n).collect(),
        transitions,
    })
    .map_err(|e| e.to_string())?;
    let mut cfg = TabularConfig::new(r, kind, episodes, seed);
    cfg.record_every = (episodes / points.max(1)).max(1);
    let run = td0_policy_evaluation(&mdp, &TabularPolicy::uniform(&mdp), &cfg).map_err(|e| e.to_string())?;
    let mut out = vec![
        certainty_equivalent(&dist, r).map_err(|e| e.to_string())?,
        kind.fixed_point(&dist, r).unwrap_or(f64::NAN),
    ];
    out.extend(run.history.iter().map(|h| h.metric_value));
    Ok(out)
}

#[wasm_bindgen]
pub fn loss_curves(alpha: f64, lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, JsError> {
    loss_curves_impl(alpha, lo, hi, n).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn ce_vs_alpha(outcomes: Vec<f64>, probs: Vec<f64>, alpha_max: f64, n: usize) -> Result<Vec<f64>, JsError> {
    ce_vs_alpha_impl(outcomes, probs, alpha_max, n).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn sa_trace(
    kind: &str,
    alpha: f64,
    outcomes: Vec<f64>,
    probs: Vec<f64>,
    episodes: usize,
    points: usize,
    seed: u64,
) -> Result<Vec<f64>, JsError> {
    sa_trace_impl(kind, alpha, outcomes, probs, episodes, points, seed).map_err(|e| JsError::new(&e))
}
