//! Classical growth curves used as the deterministic input `v` of the time change.

/// Logistic right-hand side `f(z) = z(1 - z)`.
pub fn logistic_rhs(z: f64) -> f64 {
    z * (1.0 - z)
}

/// Solution of `v' = v(1 - v)`, `v(0) = v0`.
pub fn logistic_curve(v0: f64, t: f64) -> f64 {
    v0 / (v0 + (1.0 - v0) * (-t).exp())
}

/// `∫₀^T v(t) dt = ln(v0 e^T + 1 - v0)` for the logistic curve.
pub fn logistic_integral(v0: f64, horizon: f64) -> f64 {
    // ln(v0 e^T + 1 - v0) = T + ln(v0 + (1 - v0) e^{-T})
    horizon + (v0 + (1.0 - v0) * (-horizon).exp()).ln()
}

/// A scalar growth profile `v` with its name for CSV metadata.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Profile {
    Logistic { v0: f64 },
    Exponential { decay: f64 },
    Identity,
    Constant { value: f64 },
    /// `x^k / k!`, whose mean under `L_t` is `φ_k(t)`.
    RescaledPower { k: u32 },
}

impl Profile {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Profile::Logistic { v0 } => logistic_curve(v0, x),
            Profile::Exponential { decay } => (-decay * x).exp(),
            Profile::Identity => x,
            Profile::Constant { value } => value,
            Profile::RescaledPower { k } => {
                (1..=k).fold(1.0, |acc, i| acc * x / i as f64)
            }
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            Profile::Logistic { v0 } => format!("v=logistic;v0={v0}"),
            Profile::Exponential { decay } => format!("v=exp;decay={decay}"),
            Profile::Identity => "v=identity".into(),
            Profile::Constant { value } => format!("v=const;value={value}"),
            Profile::RescaledPower { k } => format!("v=power;k={k}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_integral_matches_trapezoid() {
        let v0 = 0.1;
        let n = 200_000;
        let h = 10.0 / n as f64;
        let mut s = 0.5 * (logistic_curve(v0, 0.0) + logistic_curve(v0, 10.0));
        for i in 1..n {
            s += logistic_curve(v0, i as f64 * h);
        }
        assert!((s * h - logistic_integral(v0, 10.0)).abs() < 1e-9);
    }
}
