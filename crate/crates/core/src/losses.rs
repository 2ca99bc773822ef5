//! Value-learning objectives as functions of the TD error.
//!
//! Every loss returns its value together with its exact derivative, so callers
//! (tabular stochastic approximation, the MLP backward pass) chain on the
//! gradient directly. The TD error is `δ = V(s) − r − V⁻(s′)`; positive `δ`
//! means the estimate overshoots its bootstrap target.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::entropic::{DiscreteDistribution, RiskAversion};
use crate::error::{input, Error, Result};

mod dilog;

pub use dilog::dilogarithm;

/// Below this `|αδ|` the Itakura-Saito loss switches to its second-order
/// Taylor form (`δ²/2`, `δ(1 + αδ/2)`); `e^{y} − y − 1` cancels catastrophically near 0.
pub const IS_TAYLOR_SWITCH: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LossKind {
    Mse,
    Emse,
    Softplus,
    ItakuraSaito,
}

impl LossKind {
    pub const ALL: [LossKind; 4] = [LossKind::Mse, LossKind::Emse, LossKind::Softplus, LossKind::ItakuraSaito];

    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::Mse => "mse",
            LossKind::Emse => "emse",
            LossKind::Softplus => "sp",
            LossKind::ItakuraSaito => "is",
        }
    }

    /// Loss of predicting `v_s` for a sampled bootstrap `target`; the gradient
    /// is with respect to `v_s` (equivalently `δ`).
    ///
    /// At `α = 0` every kind reduces to MSE and is evaluated as such. The
    /// function never fails on non-finite input: NaN and infinities propagate
    /// so that instability stays observable.
    pub fn evaluate(self, v_s: f64, target: f64, ra: RiskAversion) -> LossEval {
        let alpha = ra.alpha();
        let delta = v_s - target;
        if alpha == 0.0 {
            return mse(delta);
        }
        match self {
            LossKind::Mse => mse(delta),
            LossKind::Emse => emse(v_s, target, alpha),
            LossKind::Softplus => softplus(delta, alpha),
            LossKind::ItakuraSaito => itakura_saito(delta, alpha),
        }
    }

    /// The value a tabular stochastic-approximation rule of this kind settles
    /// on for a one-step target law: the root of `v ↦ E[∂loss(v, X)]`.
    pub fn fixed_point(self, target: &DiscreteDistribution, ra: RiskAversion) -> Result<f64> {
        let mean_grad = |v: f64| -> f64 {
            target.iter().map(|(x, p)| p * self.evaluate(v, x, ra).grad).sum()
        };
        let (mut lo, mut hi) = target
            .outcomes()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        // the mean gradient is increasing in v, negative below the support and positive above it
        lo -= 1.0;
        hi += 1.0;
        if !(mean_grad(lo) <= 0.0 && mean_grad(hi) >= 0.0) {
            return Err(Error::Internal(format!("{self} gradient does not bracket a root")));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mean_grad(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mse" => Ok(LossKind::Mse),
            "emse" => Ok(LossKind::Emse),
            "sp" | "softplus" => Ok(LossKind::Softplus),
            "is" | "itakura-saito" | "itakura_saito" => Ok(LossKind::ItakuraSaito),
            other => input(format!("unknown loss kind '{other}'")),
        }
    }
}

/// Temporal-difference error `V(s) − r − V⁻(s′)`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct TdError(f64);

impl TdError {
    pub fn new(delta: f64) -> Result<Self> {
        if delta.is_finite() {
            Ok(Self(delta))
        } else {
            input(format!("TD error must be finite, got {delta}"))
        }
    }

    pub fn from_values(v_s: f64, target: f64) -> Result<Self> {
        Self::new(v_s - target)
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// A loss value and its derivative.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossEval {
    pub value: f64,
    pub grad: f64,
}

pub fn mse_loss(d: TdError) -> LossEval {
    mse(d.0)
}

/// `(2α²)⁻¹ (e^{−α v_s} − e^{−α·target})²`, gradient in `v_s`.
///
/// No rescaling is applied; the exponentials overflow for large `α|v|`.
pub fn emse_loss(v_s: f64, target: f64, ra: RiskAversion) -> Result<LossEval> {
    let alpha = ra.require_positive("exponential MSE")?;
    Ok(emse(v_s, target, alpha))
}

/// `2δα⁻¹ log(1+e^{αδ}) + 2α⁻² li₂(−e^{αδ}) + π²/(6α²)`; gradient `2δ·σ(αδ)`.
pub fn softplus_loss(d: TdError, ra: RiskAversion) -> Result<LossEval> {
    let alpha = ra.require_positive("softplus loss")?;
    Ok(softplus(d.0, alpha))
}

/// `α⁻² (e^{αδ} − αδ − 1)`; gradient `α⁻¹ (e^{αδ} − 1)`.
pub fn is_loss(d: TdError, ra: RiskAversion) -> Result<LossEval> {
    let alpha = ra.require_positive("Itakura-Saito loss")?;
    Ok(itakura_saito(d.0, alpha))
}

/// Itakura-Saito distance `x/y − log(x/y) − 1`.
pub fn is_divergence(x: f64, y: f64) -> Result<f64> {
    if !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()) {
        return input(format!("Itakura-Saito divergence needs positive finite inputs, got ({x}, {y})"));
    }
    let r = x / y;
    Ok(r - r.ln() - 1.0)
}

/// `log(1 + e^x)` without overflow.
#[inline]
pub fn softplus_fn(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn mse(delta: f64) -> LossEval {
    LossEval { value: 0.5 * delta * delta, grad: delta }
}

#[inline]
fn emse(v_s: f64, target: f64, alpha: f64) -> LossEval {
    let pred = (-alpha * v_s).exp();
    let tgt = (-alpha * target).exp();
    let diff = pred - tgt;
    LossEval {
        value: 0.5 * diff * diff / (alpha * alpha),
        grad: pred * (tgt - pred) / alpha,
    }
}

fn softplus(delta: f64, alpha: f64) -> LossEval {
    let y = alpha * delta;
    // f(y) = 2y·softplus(y) + 2 li₂(−e^y) + π²/6, value = f / α²
    let f = 2.0 * y * softplus_fn(y) + 2.0 * li2_neg_exp(y) + PI * PI / 6.0;
    LossEval {
        value: f / (alpha * alpha),
        grad: 2.0 * delta * logistic(y),
    }
}

/// `li₂(−e^y)` for any real `y`, inverting the argument when `e^y > 1`.
fn li2_neg_exp(y: f64) -> f64 {
    if y <= 0.0 {
        dilog::li2(-y.exp())
    } else {
        -PI * PI / 6.0 - 0.5 * y * y - dilog::li2(-(-y).exp())
    }
}

#[inline]
fn itakura_saito(delta: f64, alpha: f64) -> LossEval {
    let y = alpha * delta;
    if y.abs() < IS_TAYLOR_SWITCH {
        LossEval {
            value: 0.5 * delta * delta,
            grad: delta * (1.0 + 0.5 * y),
        }
    } else {
        let em1 = y.exp_m1();
        LossEval {
            value: (em1 - y) / (alpha * alpha),
            grad: em1 / alpha,
        }
    }
}
