//! Spence's dilogarithm `li₂(x) = −∫₀ˣ log(1−t)/t dt` on `x ≤ 1`.
//!
//! The power series `Σ xᵏ/k²` is summed on `|x| ≤ ½`. Everything else is
//! mapped into that disc:
//!
//! - `x < −1`: inversion, `li₂(x) = −π²/6 − ½ log²(−x) − li₂(1/x)`
//! - `−1 ≤ x < −½`: Landen, `li₂(x) = −li₂(x/(x−1)) − ½ log²(1−x)`
//! - `½ < x < 1`: reflection, `li₂(x) = π²/6 − log(x) log(1−x) − li₂(1−x)`

use std::f64::consts::PI;

use crate::error::{input, Result};

const ZETA2: f64 = PI * PI / 6.0;

pub fn dilogarithm(x: f64) -> Result<f64> {
    if x.is_nan() || x > 1.0 {
        return input(format!("dilogarithm is defined here for x <= 1, got {x}"));
    }
    Ok(li2(x))
}

pub(crate) fn li2(x: f64) -> f64 {
    if x == 1.0 {
        ZETA2
    } else if x == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else if x < -1.0 {
        let l = (-x).ln();
        -ZETA2 - 0.5 * l * l - li2(1.0 / x)
    } else if x < -0.5 {
        let l = (-x).ln_1p();
        -series(x / (x - 1.0)) - 0.5 * l * l
    } else if x <= 0.5 {
        series(x)
    } else {
        ZETA2 - x.ln() * (-x).ln_1p() - series(1.0 - x)
    }
}

fn series(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut pow = x;
    for k in 1..=200u32 {
        let term = pow / f64::from(k * k);
        sum += term;
        if term.abs() <= 1e-18 * sum.abs().max(1e-300) {
            break;
        }
        pow *= x;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        assert_eq!(dilogarithm(0.0).unwrap(), 0.0);
        assert!((dilogarithm(-1.0).unwrap() + PI * PI / 12.0).abs() < 1e-15);
        let ln2 = 2f64.ln();
        assert!((dilogarithm(0.5).unwrap() - (PI * PI / 12.0 - 0.5 * ln2 * ln2)).abs() < 1e-15);
        assert!((dilogarithm(1.0).unwrap() - ZETA2).abs() < 1e-15);
        assert!(dilogarithm(1.5).is_err());
    }

    #[test]
    fn branches_agree_at_seams() {
        for x in [-1.0f64, -0.5, 0.5] {
            let below = li2(x - 1e-12);
            let above = li2(x + 1e-12);
            assert!((below - above).abs() < 1e-10, "seam at {x}");
        }
    }

    #[test]
    fn euler_reflection_identity() {
        // li₂(x) + li₂(1 − x) = π²/6 − log x log(1 − x)
        for &x in &[0.1, 0.3, 0.7, 0.95] {
            let lhs = li2(x) + li2(1.0 - x);
            let rhs = ZETA2 - f64::ln(x) * f64::ln(1.0 - x);
            assert!((lhs - rhs).abs() < 1e-13);
        }
    }
}
