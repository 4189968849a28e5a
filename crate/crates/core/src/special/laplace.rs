//! Numerical inversion of Laplace transforms.
//!
//! Two independent inverters are provided: the Gaver–Stehfest rule, which
//! only needs the transform on the positive real axis, and the fixed Talbot
//! contour of Abate and Valkó, which needs complex evaluations. They fail in
//! different ways, so each is used to cross-check the other.

use std::f64::consts::LN_2;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Default Gaver–Stehfest order.
pub const STEHFEST_ORDER: usize = 16;
/// Number of nodes on the Talbot contour.
pub const TALBOT_NODES: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InversionMethod {
    GaverStehfest,
    Talbot,
}

impl InversionMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            InversionMethod::GaverStehfest => "gaver_stehfest",
            InversionMethod::Talbot => "talbot",
        }
    }
}

impl std::str::FromStr for InversionMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaver_stehfest" | "stehfest" => Ok(InversionMethod::GaverStehfest),
            "talbot" => Ok(InversionMethod::Talbot),
            other => Err(Error::Domain(format!("unknown inversion method {other:?}"))),
        }
    }
}

/// A Laplace transform `F(λ)`.
pub trait LaplaceTransform {
    fn eval(&self, lambda: f64) -> f64;

    /// Evaluation off the real axis; `None` when the transform is only known
    /// for real arguments.
    fn eval_complex(&self, _lambda: Complex64) -> Option<Complex64> {
        None
    }
}

/// Adapter for a transform known only on the real axis.
pub struct RealTransform<F>(pub F);

impl<F: Fn(f64) -> f64> LaplaceTransform for RealTransform<F> {
    fn eval(&self, lambda: f64) -> f64 {
        (self.0)(lambda)
    }
}

/// Adapter for a transform analytic off the negative real axis.
pub struct ComplexTransform<F>(pub F);

impl<F: Fn(Complex64) -> Complex64> LaplaceTransform for ComplexTransform<F> {
    fn eval(&self, lambda: f64) -> f64 {
        (self.0)(Complex64::new(lambda, 0.0)).re
    }
    fn eval_complex(&self, lambda: Complex64) -> Option<Complex64> {
        Some((self.0)(lambda))
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Stehfest weights `V_1..V_N` for even `N`.
pub fn stehfest_weights(order: usize) -> Vec<f64> {
    assert!(order >= 2 && order % 2 == 0, "Stehfest order must be even");
    let half = order / 2;
    (1..=order)
        .map(|k| {
            let mut sum = 0.0;
            for j in (k + 1) / 2..=k.min(half) {
                sum += (j as f64).powi(half as i32) * factorial(2 * j)
                    / (factorial(half - j)
                        * factorial(j)
                        * factorial(j - 1)
                        * factorial(k - j)
                        * factorial(2 * j - k));
            }
            if (k + half) % 2 == 0 {
                sum
            } else {
                -sum
            }
        })
        .collect()
}

/// Plain Gaver–Stehfest sum of the given order.
pub fn gaver_stehfest(f: &dyn LaplaceTransform, t: f64, order: usize) -> f64 {
    let a = LN_2 / t;
    stehfest_weights(order)
        .iter()
        .enumerate()
        .map(|(i, v)| v * f.eval(a * (i + 1) as f64))
        .sum::<f64>()
        * a
}

/// Fixed Talbot contour with `nodes` points.
pub fn talbot(f: &dyn LaplaceTransform, t: f64, nodes: usize) -> Result<f64> {
    let m = nodes as f64;
    let r = 2.0 * m / (5.0 * t);
    let f0 = f.eval_complex(Complex64::new(r, 0.0)).ok_or_else(|| {
        Error::Capability("Talbot inversion needs complex evaluations of the transform".into())
    })?;
    let mut sum = 0.5 * (f0 * (r * t).exp()).re;
    for k in 1..nodes {
        let theta = k as f64 * std::f64::consts::PI / m;
        let cot = theta.cos() / theta.sin();
        let s = Complex64::new(r * theta * cot, r * theta);
        let sigma = theta + (theta * cot - 1.0) * cot;
        let fs = f
            .eval_complex(s)
            .ok_or_else(|| Error::Capability("complex evaluation unavailable".into()))?;
        sum += ((s * t).exp() * fs * Complex64::new(1.0, sigma)).re;
    }
    Ok(r / m * sum)
}

/// Inverts `F` at time `t`.
///
/// The Gaver–Stehfest result is compared against the order-two-lower sum;
/// a relative spread above `1e-4` is reported as a tolerance failure.
pub fn laplace_invert(f: &dyn LaplaceTransform, t: f64, method: InversionMethod) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("inversion time must be positive, got {t}")));
    }
    let value = match method {
        InversionMethod::GaverStehfest => {
            let high = gaver_stehfest(f, t, STEHFEST_ORDER);
            let low = gaver_stehfest(f, t, STEHFEST_ORDER - 2);
            let spread = (high - low).abs();
            if !high.is_finite() || spread > 1e-4 * high.abs().max(1e-12) {
                return Err(Error::tolerance(
                    "Gaver-Stehfest sums disagree across orders",
                    vec![
                        ("t".into(), t),
                        (format!("order_{}", STEHFEST_ORDER), high),
                        (format!("order_{}", STEHFEST_ORDER - 2), low),
                    ],
                ));
            }
            high
        }
        InversionMethod::Talbot => talbot(f, t, TALBOT_NODES)?,
    };
    if !value.is_finite() {
        return Err(Error::tolerance(
            "non-finite inverse transform",
            vec![("t".into(), t)],
        ));
    }
    Ok(value)
}
