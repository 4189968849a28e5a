//! Density of the inverse stable subordinator.
//!
//! For `Φ(λ) = λ^α` the marginal law of `L_t` is `l(t, x) = t^{-α} M_α(x t^{-α})`
//! with the Mainardi–Wright function
//! `M_α(z) = Σ_n (-z)^n / (n! Γ(1 - α - αn))`.
//!
//! The series is entire but alternates with growing terms, so for large `z`
//! it is replaced by the Zolotarev integral. From `P(L_t ≤ x) = P(S ≥ t x^{-1/α})`
//! and Kanter's representation `S = (A(U)/E)^{(1-α)/α}`,
//!
//! ```text
//! l(t, x) = w / (π (1-α) x) ∫₀^π A(u) e^{-A(u) w} du,   w = t^{-α/(1-α)} x^{1/(1-α)},
//! A(u)    = [sin(αu)^α sin((1-α)u)^{1-α} / sin u]^{1/(1-α)}.
//! ```

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quad::Quadrature;
use crate::special::functions::{ln_gamma, ln_rgamma_signed};

/// Zolotarev's function `A(u)` on `(0, π)`.
pub fn zolotarev_a(alpha: f64, u: f64) -> f64 {
    let ln_a = (alpha * (alpha * u).sin().ln() + (1.0 - alpha) * ((1.0 - alpha) * u).sin().ln()
        - u.sin().ln())
        / (1.0 - alpha);
    ln_a.exp()
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "inverse stable density needs α in (0, 1), got {alpha}"
        )))
    }
}

/// Series value of `M_α(z)` with a bound on the discarded tail, or `None`
/// when cancellation destroys the requested accuracy.
fn mainardi_series(alpha: f64, z: f64) -> Option<(f64, f64)> {
    if z == 0.0 {
        let (l, s) = ln_rgamma_signed(1.0 - alpha);
        return Some((s * l.exp(), 0.0));
    }
    let lnz = z.ln();
    let mut sum = 0.0;
    let mut max_term: f64 = 0.0;
    let mut prev = f64::INFINITY;
    for n in 0..2000usize {
        let nf = n as f64;
        let y = 1.0 - alpha - alpha * nf;
        // Envelope |z^n Γ(1-y) / (π n!)| without the sin(πy) factor, so terms
        // near a pole of Γ do not look like convergence.
        let envelope = if y < 0.5 {
            (nf * lnz - ln_gamma(nf + 1.0) + ln_gamma(1.0 - y) - PI.ln()).exp()
        } else {
            (nf * lnz - ln_gamma(nf + 1.0) - ln_gamma(y)).exp()
        };
        let (lr, sign) = ln_rgamma_signed(y);
        if sign != 0.0 {
            let magnitude = (nf * lnz - ln_gamma(nf + 1.0) + lr).exp();
            sum += if n % 2 == 1 { -sign * magnitude } else { sign * magnitude };
            max_term = max_term.max(magnitude);
        }
        if !sum.is_finite() {
            return None;
        }
        // Past the peak the envelope decays faster than geometrically, so the
        // next term bounds the tail.
        if n > 2 && envelope <= prev && envelope < 1e-17 * max_term.max(1e-300) {
            let rounding = max_term * 1e-15;
            if rounding > 1e-11 * sum.abs().max(1e-300) {
                return None;
            }
            return Some((sum, envelope + rounding));
        }
        prev = envelope;
    }
    None
}

fn density_integral(alpha: f64, t: f64, x: f64) -> Result<f64> {
    let c = alpha / (1.0 - alpha);
    let w = (x.ln() / (1.0 - alpha) - c * t.ln()).exp();
    if w > 700.0 {
        // A(u) ≥ A(0+) > 0.2 for every α so the integrand is below e^{-140}.
        let a0 = alpha.powf(c) * (1.0 - alpha);
        if a0 * w > 745.0 {
            return Ok(0.0);
        }
    }
    let integrand = |u: f64| {
        let a = zolotarev_a(alpha, u);
        let e = a * w;
        if e > 745.0 {
            0.0
        } else {
            a * (-e).exp()
        }
    };
    // A is increasing on (0, π); the integrand lives where A·w is of order
    // one, or near u = 0 when A(0+)·w is already large.
    let a0 = alpha.powf(c) * (1.0 - alpha);
    let mut levels: Vec<f64> = [1e-3, 1e-2, 0.1, 1.0, 10.0, 100.0]
        .iter()
        .copied()
        .chain([0.1, 1.0, 5.0, 20.0, 80.0, 300.0].iter().map(|d| a0 * w + d))
        .filter(|&lv| lv > a0 * w)
        .collect();
    levels.sort_by(f64::total_cmp);
    let mut points = vec![0.0];
    for lv in levels {
        let u = solve_level(alpha, lv / w);
        if u > *points.last().unwrap() && u < PI {
            points.push(u);
        }
    }
    points.push(PI);
    let quad = Quadrature::with_tolerance(1e-300, 1e-12);
    let integral = quad.integrate_breaks(integrand, &points)?;
    Ok(w / (PI * (1.0 - alpha) * x) * integral.value)
}

/// The `u ∈ (0, π)` with `A(u) = target`, by bisection.
fn solve_level(alpha: f64, target: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, PI);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if zolotarev_a(alpha, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `M_α(z)` for `z ≥ 0`.
pub fn mainardi(alpha: f64, z: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if z < 0.0 {
        return Err(Error::Domain(format!("M_α needs z ≥ 0, got {z}")));
    }
    if let Some((value, _)) = mainardi_series(alpha, z) {
        return Ok(value);
    }
    // t = 1: l(1, z) = M_α(z)
    density_integral(alpha, 1.0, z)
}

/// Density `l(t, x)` of `L_t` for the inverse of the `α`-stable subordinator.
pub fn inv_stable_density(alpha: f64, t: f64, x: f64) -> Result<f64> {
    inv_stable_density_traced(alpha, t, x).map(|(v, _)| v)
}

/// As [`inv_stable_density`], also naming the branch used: `series` or `integral`.
pub fn inv_stable_density_traced(alpha: f64, t: f64, x: f64) -> Result<(f64, &'static str)> {
    check_alpha(alpha)?;
    if !(t > 0.0) || !(x > 0.0) {
        return Err(Error::Domain(format!(
            "inverse stable density needs t > 0 and x > 0, got t={t}, x={x}"
        )));
    }
    let scale = t.powf(-alpha);
    let z = x * scale;
    if let Some((value, _)) = mainardi_series(alpha, z) {
        return Ok(((scale * value).max(0.0), "series"));
    }
    let value = density_integral(alpha, t, x).map_err(|e| match e {
        Error::NumericalTolerance { diagnostics, .. } => Error::tolerance(
            "inverse stable density: series and integral both failed",
            [
                vec![("alpha".into(), alpha), ("t".into(), t), ("x".into(), x)],
                diagnostics,
            ]
            .concat(),
        ),
        other => other,
    })?;
    Ok((value.max(0.0), "integral"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_order_closed_form() {
        for &(t, x) in &[(1.0f64, 1.0f64), (0.5, 0.2), (2.0, 3.0), (1.0, 6.0), (0.1, 1.5)] {
            let expected = (-(x * x) / (4.0 * t)).exp() / (PI * t).sqrt();
            let got = inv_stable_density(0.5, t, x).unwrap();
            assert!(
                (got - expected).abs() < 1e-10 * expected.max(1e-6),
                "t={t} x={x}: {got} vs {expected}"
            );
        }
        let at_one = inv_stable_density(0.5, 1.0, 1.0).unwrap();
        assert!((at_one - 0.439_391_289_467_722_4).abs() < 1e-12);
    }

    #[test]
    fn series_and_integral_agree() {
        for &alpha in &[0.25, 0.5, 0.7, 0.9] {
            for &z in &[0.3, 1.0, 2.0] {
                let integral = density_integral(alpha, 1.0, z).unwrap();
                let Some((series, _)) = mainardi_series(alpha, z) else {
                    // cancellation: the public entry point must fall back
                    assert!(alpha > 0.8 && z > 1.0, "series rejected alpha={alpha} z={z}");
                    assert_eq!(mainardi(alpha, z).unwrap(), integral);
                    continue;
                };
                assert!(
                    (series - integral).abs() < 1e-9,
                    "alpha={alpha} z={z}: {series} vs {integral}"
                );
            }
        }
    }

    #[test]
    fn mainardi_at_zero() {
        let m = mainardi(0.3, 0.0).unwrap();
        assert!((m - 1.0 / crate::special::functions::gamma(0.7)).abs() < 1e-14);
    }
}
