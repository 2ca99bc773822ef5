//! Exponential-utility certainty equivalent.
//!
//! For a random reward `X` and risk aversion `α > 0` the certainty equivalent is
//! `−α⁻¹ log E[exp(−α X)]`. It is normalised, monotone, translation invariant,
//! satisfies the tower property, and is concave. At `α = 0` it is the mean.

use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};

/// Tolerance on `Σ p = 1` accepted by [`DiscreteDistribution::new`].
pub const PROB_SUM_TOL: f64 = 1e-12;

/// Risk-aversion coefficient `α` of the exponential utility.
///
/// `α = 0` is the risk-neutral limit. Negative (risk-seeking) values are only
/// constructible through [`RiskAversion::risk_seeking`]; learners reject them.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct RiskAversion(f64);

impl RiskAversion {
    pub fn new(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() {
            return input(format!("risk aversion must be finite, got {alpha}"));
        }
        if alpha < 0.0 {
            return input(format!("risk aversion must be non-negative, got {alpha}"));
        }
        Ok(Self(alpha))
    }

    pub const fn neutral() -> Self {
        Self(0.0)
    }

    /// Accepts any finite `α`, including negative values.
    pub fn risk_seeking(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() {
            return input(format!("risk aversion must be finite, got {alpha}"));
        }
        Ok(Self(alpha))
    }

    #[inline]
    pub fn alpha(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn is_neutral(self) -> bool {
        self.0 == 0.0
    }

    /// Errors unless `α > 0`.
    pub fn require_positive(self, what: &str) -> Result<f64> {
        if self.0 > 0.0 {
            Ok(self.0)
        } else {
            input(format!("{what} requires alpha > 0, got {}", self.0))
        }
    }
}

/// A finitely supported law: outcomes with matching probabilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDistribution {
    outcomes: Vec<f64>,
    probs: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(outcomes: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if outcomes.is_empty() {
            return input("distribution must have at least one outcome");
        }
        if outcomes.len() != probs.len() {
            return input(format!(
                "{} outcomes but {} probabilities",
                outcomes.len(),
                probs.len()
            ));
        }
        if let Some(x) = outcomes.iter().find(|x| !x.is_finite()) {
            return input(format!("non-finite outcome {x}"));
        }
        if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return input(format!("invalid probability {p}"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return input(format!("probabilities sum to {total}, expected 1"));
        }
        Ok(Self { outcomes, probs })
    }

    pub fn point_mass(x: f64) -> Result<Self> {
        Self::new(vec![x], vec![1.0])
    }

    /// Equal weight on every outcome.
    pub fn uniform(outcomes: Vec<f64>) -> Result<Self> {
        let n = outcomes.len().max(1);
        let probs = vec![1.0 / n as f64; outcomes.len()];
        Self::new(outcomes, probs)
    }

    /// Normalises non-negative weights to probabilities.
    pub fn from_weights(outcomes: Vec<f64>, weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return input(format!("weights must have a positive finite sum, got {total}"));
        }
        let probs = weights.iter().map(|w| w / total).collect();
        Self::new(outcomes, probs)
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + Clone + '_ {
        self.outcomes.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(x, p)| p * x).sum()
    }

    /// Same probabilities, outcomes mapped through `f`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.outcomes.iter().map(|&x| f(x)).collect(), self.probs.clone())
    }

    pub fn shifted(&self, c: f64) -> Result<Self> {
        self.map(|x| x + c)
    }
}

/// `−α⁻¹ log Σ pᵢ exp(−α xᵢ)`, or the mean at `α = 0`.
pub fn certainty_equivalent(dist: &DiscreteDistribution, ra: RiskAversion) -> Result<f64> {
    let ce = weighted_ce(dist.iter().map(|(x, p)| (p, x)), ra.alpha());
    if ce.is_finite() {
        Ok(ce)
    } else {
        Err(Error::Internal(format!(
            "certainty equivalent evaluated to {ce} for finite inputs"
        )))
    }
}

/// Certainty equivalent of `N(mean, variance)`: `mean − α·variance/2`.
pub fn gaussian_certainty_equivalent(mean: f64, variance: f64, ra: RiskAversion) -> Result<f64> {
    if !(variance >= 0.0) || !variance.is_finite() {
        return input(format!("variance must be finite and non-negative, got {variance}"));
    }
    if !mean.is_finite() {
        return input(format!("mean must be finite, got {mean}"));
    }
    Ok(mean - 0.5 * ra.alpha() * variance)
}

/// Max-shifted log-sum-exp evaluation over `(probability, outcome)` pairs.
///
/// Zero-probability pairs are ignored. With `y = −α x` and `m = max y`, the
/// sum `Σ p e^{y−m}` is formed as `1 + Σ p expm1(y−m)` so small `α` keeps
/// full relative precision.
pub(crate) fn weighted_ce<I>(pairs: I, alpha: f64) -> f64
where
    I: IntoIterator<Item = (f64, f64)> + Clone,
{
    if alpha == 0.0 {
        return pairs.into_iter().map(|(p, x)| p * x).sum();
    }
    let m = pairs
        .clone()
        .into_iter()
        .filter(|(p, _)| *p > 0.0)
        .map(|(_, x)| -alpha * x)
        .fold(f64::NEG_INFINITY, f64::max);
    let (mut total, mut s) = (0.0, 0.0);
    for (p, x) in pairs {
        if p > 0.0 {
            total += p;
            s += p * (-alpha * x - m).exp_m1();
        }
    }
    // Σ p e^{y−m} = total + s; total is 1 up to rounding.
    let log_sum = (total - 1.0 + s).ln_1p();
    -(m + log_sum) / alpha
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coin() -> DiscreteDistribution {
        DiscreteDistribution::uniform(vec![1.0, -1.0]).unwrap()
    }

    #[test]
    fn point_mass_at_zero_is_zero() {
        let d = DiscreteDistribution::point_mass(0.0).unwrap();
        for a in [0.0, 0.1, 1.0, 10.0, 100.0] {
            assert_eq!(certainty_equivalent(&d, RiskAversion::new(a).unwrap()).unwrap(), 0.0);
        }
    }

    #[test]
    fn coin_flip_values() {
        let ce = certainty_equivalent(&coin(), RiskAversion::new(1.0).unwrap()).unwrap();
        assert!((ce - (-(1.0f64.cosh().ln()))).abs() < 1e-14);
        assert!((ce + 0.433781).abs() < 1e-6);
        let neutral = certainty_equivalent(&coin(), RiskAversion::neutral()).unwrap();
        assert_eq!(neutral, 0.0);
    }

    #[test]
    fn no_overflow_at_large_exponents() {
        let d = DiscreteDistribution::uniform(vec![-7.0, 3.0]).unwrap();
        let ce = certainty_equivalent(&d, RiskAversion::new(100.0).unwrap()).unwrap();
        // dominated by the worst outcome: −7 − ln(2)/100 up to e^{-1000}
        assert!((ce - (-7.0 + 2f64.ln() / 100.0)).abs() < 1e-12);
    }

    #[test]
    fn gaussian_closed_form() {
        let ra = |a| RiskAversion::new(a).unwrap();
        assert_eq!(gaussian_certainty_equivalent(0.0, 1.0, ra(1.0)).unwrap(), -0.5);
        assert_eq!(gaussian_certainty_equivalent(3.0, 0.0, ra(7.0)).unwrap(), 3.0);
        assert_eq!(gaussian_certainty_equivalent(0.5, 2.0, ra(0.25)).unwrap(), 0.25);
        assert!(gaussian_certainty_equivalent(0.0, -1.0, ra(1.0)).is_err());
    }

    #[test]
    fn rejects_bad_distributions() {
        assert!(DiscreteDistribution::new(vec![], vec![]).is_err());
        assert!(DiscreteDistribution::new(vec![1.0], vec![0.5]).is_err());
        assert!(DiscreteDistribution::new(vec![1.0, 2.0], vec![1.0]).is_err());
        assert!(DiscreteDistribution::new(vec![1.0, 2.0], vec![1.5, -0.5]).is_err());
        assert!(RiskAversion::new(-1.0).is_err());
        assert!(RiskAversion::new(f64::NAN).is_err());
        assert!(RiskAversion::risk_seeking(-1.0).is_ok());
    }

    #[test]
    fn continuity_at_zero() {
        let d = DiscreteDistribution::new(vec![2.0, -3.0, 0.5], vec![0.2, 0.3, 0.5]).unwrap();
        let ce = certainty_equivalent(&d, RiskAversion::new(1e-8).unwrap()).unwrap();
        assert!((ce - d.mean()).abs() <= 1e-6);
    }

    #[test]
    fn risk_seeking_exceeds_mean() {
        let ce = certainty_equivalent(&coin(), RiskAversion::risk_seeking(-1.0).unwrap()).unwrap();
        assert!((ce - 1.0f64.cosh().ln()).abs() < 1e-14);
    }
}
