//! Scalar special functions shared across the crate.
//!
//! Gamma, error and regularized incomplete gamma functions come from `statrs`;
//! the exponential integral and the reciprocal gamma on the negative axis are
//! local.

use std::f64::consts::PI;

pub use statrs::function::erf::{erfc, erfc_inv};
pub use statrs::function::gamma::{gamma, ln_gamma};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_6;

/// `1 / Γ(y)` for any real `y`, zero at the poles.
pub fn rgamma(y: f64) -> f64 {
    if y <= 0.0 && y == y.floor() {
        return 0.0;
    }
    if y < 0.5 {
        (PI * y).sin() * gamma(1.0 - y) / PI
    } else if y > 170.0 {
        (-ln_gamma(y)).exp()
    } else {
        1.0 / gamma(y)
    }
}

/// `ln |1 / Γ(y)|` and the sign of `1 / Γ(y)`; `(-inf, 0)` at the poles.
pub fn ln_rgamma_signed(y: f64) -> (f64, f64) {
    if y <= 0.0 && y == y.floor() {
        return (f64::NEG_INFINITY, 0.0);
    }
    if y >= 0.5 {
        return (-ln_gamma(y), 1.0);
    }
    let s = (PI * y).sin();
    (s.abs().ln() + ln_gamma(1.0 - y) - PI.ln(), s.signum())
}

/// Regularized upper incomplete gamma `Q(a, x) = Γ(a, x) / Γ(a)` for `a > 0`, `x ≥ 0`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        statrs::function::gamma::gamma_ur(a, x)
    }
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        statrs::function::gamma::gamma_lr(a, x)
    }
}

/// Exponential integral `E₁(x) = ∫ₓ^∞ e^{-y}/y dy` for `x > 0`.
pub fn expint_e1(x: f64) -> f64 {
    if x <= 0.0 {
        return f64::INFINITY;
    }
    if x <= 1.0 {
        // -γ - ln x - Σ_{k≥1} (-x)^k / (k·k!)
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            term *= -x / k as f64;
            let add = term / k as f64;
            sum += add;
            if add.abs() < 1e-17 * sum.abs().max(1e-300) {
                break;
            }
        }
        -EULER_GAMMA - x.ln() - sum
    } else {
        // Modified Lentz evaluation of the continued fraction for e^{x} E₁(x).
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-x).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::Quadrature;

    #[test]
    fn e1_matches_quadrature() {
        let q = Quadrature::default();
        for &x in &[0.05, 0.5, 1.0, 2.5, 10.0] {
            let reference = q
                .integrate_to_infinity(|y: f64| (-y).exp() / y, x)
                .unwrap()
                .value;
            let value = expint_e1(x);
            assert!(
                (value - reference).abs() < 1e-12 * reference.max(1e-3),
                "x={x}: {value} vs {reference}"
            );
        }
        assert!((expint_e1(1.0) - 0.219_383_934_395_520_3).abs() < 1e-14);
    }

    #[test]
    fn reciprocal_gamma_negative_axis() {
        assert_eq!(rgamma(0.0), 0.0);
        assert_eq!(rgamma(-3.0), 0.0);
        // Γ(-1/2) = -2√π
        assert!((rgamma(-0.5) + 1.0 / (2.0 * PI.sqrt())).abs() < 1e-14);
        let (l, s) = ln_rgamma_signed(-0.5);
        assert!((s * l.exp() - rgamma(-0.5)).abs() < 1e-14);
        assert!((rgamma(4.0) - 1.0 / 6.0).abs() < 1e-15);
    }
}
