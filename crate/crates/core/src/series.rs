//! Series solutions `ū(t) = Σ_k E_k φ_k(t)` of the non-local logistic
//! equation, the fractional Euler numbers, the West-type Mittag-Leffler series
//! and empirical convergence radii.

use crate::error::{Error, Result};
use crate::special::functions::ln_gamma;
use crate::special::{mittag_leffler, moment_phi_k};
use crate::symbols::{Family, SymbolSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoefficientKind {
    ClassicalEuler,
    FracEulerAlpha,
    Geometric,
    Conjecture,
    Custom,
}

impl CoefficientKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CoefficientKind::ClassicalEuler => "classical_euler",
            CoefficientKind::FracEulerAlpha => "frac_euler_alpha",
            CoefficientKind::Geometric => "geometric",
            CoefficientKind::Conjecture => "conjecture",
            CoefficientKind::Custom => "custom",
        }
    }
}

/// `E_0, ..., E_K` with the metadata they were generated from.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesCoefficients {
    pub kind: CoefficientKind,
    pub alpha: Option<f64>,
    pub u0: Option<f64>,
    pub values: Vec<f64>,
}

impl SeriesCoefficients {
    pub fn custom(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("a coefficient sequence needs at least E_0".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("coefficients must be finite".into()));
        }
        Ok(SeriesCoefficients {
            kind: CoefficientKind::Custom,
            alpha: None,
            u0: None,
            values,
        })
    }

    /// `E_k = (-a)^k`, for which `ū(t) = E₀[e^{-a L_t}]`.
    pub fn geometric(a: f64, order: usize) -> Self {
        SeriesCoefficients {
            kind: CoefficientKind::Geometric,
            alpha: None,
            u0: None,
            values: (0..=order).map(|k| (-a).powi(k as i32)).collect(),
        }
    }

    /// Index of the last coefficient.
    pub fn order(&self) -> usize {
        self.values.len() - 1
    }

    pub fn describe(&self) -> String {
        let mut s = format!("coefficients={}", self.kind.as_str());
        if let Some(a) = self.alpha {
            s.push_str(&format!(";alpha={a}"));
        }
        if let Some(u0) = self.u0 {
            s.push_str(&format!(";u0={u0}"));
        }
        s.push_str(&format!(";K={}", self.order()));
        s
    }
}

/// `[k i]_α = Γ(αk+1) / (Γ(αi+1) Γ(α(k-i)+1))`.
pub fn frac_binom(alpha: f64, k: usize, i: usize) -> Result<f64> {
    if i > k {
        return Err(Error::Domain(format!("binomial index i={i} exceeds k={k}")));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!("α must lie in (0, 1], got {alpha}")));
    }
    // evaluate with the smaller index first so that [k i] and [k k-i] are
    // bit-identical
    let (lo, hi) = if i <= k - i { (i, k - i) } else { (k - i, i) };
    if lo == 0 {
        return Ok(1.0);
    }
    let value = (ln_gamma(alpha * k as f64 + 1.0)
        - ln_gamma(alpha * lo as f64 + 1.0)
        - ln_gamma(alpha * hi as f64 + 1.0))
    .exp();
    if alpha == 1.0 {
        // integer binomials are exactly representable well past K = 60
        return Ok(value.round());
    }
    Ok(value)
}

/// Which indices enter the recursion sum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum RecursionBound {
    /// `i = 0..k`, which reproduces the Taylor ladder of the logistic curve at `α = 1`.
    #[default]
    Full,
    /// `i = 1..k`, with `E_1 = E_0(1 - E_0)` imposed.
    FromOne,
}

/// `E_{k+1} = E_k - Σ_i [k i]_α E_i E_{k-i}` from `E_0 = u₀`.
pub fn frac_euler_numbers(alpha: f64, u0: f64, order: usize) -> Result<SeriesCoefficients> {
    frac_euler_numbers_with(alpha, u0, order, RecursionBound::Full)
}

pub fn frac_euler_numbers_with(
    alpha: f64,
    u0: f64,
    order: usize,
    bound: RecursionBound,
) -> Result<SeriesCoefficients> {
    if order < 1 {
        return Err(Error::Domain("the series needs K ≥ 1".into()));
    }
    if !(u0 > 0.0 && u0 < 1.0) {
        return Err(Error::ParameterDomain(format!("u0 must lie in (0, 1), got {u0}")));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::ParameterDomain(format!("α must lie in (0, 1], got {alpha}")));
    }
    let mut e = Vec::with_capacity(order + 1);
    e.push(u0);
    e.push(u0 * (1.0 - u0));
    for k in 1..order {
        let start = match bound {
            RecursionBound::Full => 0,
            RecursionBound::FromOne => 1,
        };
        let mut conv = 0.0;
        for i in start..=k {
            conv += frac_binom(alpha, k, i)? * e[i] * e[k - i];
        }
        let next = e[k] - conv;
        if !next.is_finite() {
            return Err(Error::Range(format!(
                "fractional Euler recursion overflowed at k = {}; reduce K",
                k + 1
            )));
        }
        e.push(next);
    }
    Ok(SeriesCoefficients {
        kind: if alpha == 1.0 {
            CoefficientKind::ClassicalEuler
        } else {
            CoefficientKind::FracEulerAlpha
        },
        alpha: Some(alpha),
        u0: Some(u0),
        values: e,
    })
}

/// A partial sum with its truncation estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    pub trunc_bound: f64,
    /// Set when `t` lies beyond the estimated radius or the terms are not
    /// yet decreasing at the truncation index.
    pub beyond_radius: bool,
}

/// Exponent of `t` in `φ_k`'s scaling, when it is a pure power.
fn power_index(spec: &SymbolSpec) -> Option<f64> {
    match spec.family() {
        Family::Identity => Some(1.0),
        Family::Stable => spec.stable_alpha(),
        _ => None,
    }
}

/// `ū(t) = Σ_k E_k φ_k(t)`.
pub fn eval_series(coeffs: &SeriesCoefficients, spec: &SymbolSpec, t: f64) -> Result<SeriesValue> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("series evaluation needs t ≥ 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(SeriesValue {
            value: coeffs.values[0],
            trunc_bound: 0.0,
            beyond_radius: false,
        });
    }
    let mut value = 0.0;
    let mut terms = Vec::with_capacity(coeffs.values.len());
    for (k, &ek) in coeffs.values.iter().enumerate() {
        let term = if ek == 0.0 {
            0.0
        } else {
            ek * moment_phi_k(spec, k as u32, t)?
        };
        value += term;
        terms.push(term.abs());
    }
    let n = terms.len();
    let last = terms[n - 1].max(if n >= 2 { terms[n - 2] } else { 0.0 });
    let mut beyond_radius = false;
    if let (Some(p), true) = (power_index(spec), n > 8) {
        if let Ok(est) = estimate_radius_in(coeffs, p) {
            beyond_radius = t.powf(p) >= est.r;
        }
    } else if n >= 4 {
        let earlier = terms[n - 4].max(terms[n - 3]);
        beyond_radius = last > earlier;
    }
    Ok(SeriesValue {
        value,
        trunc_bound: last,
        beyond_radius,
    })
}

/// The West-type series `Σ_{k<K} r^k E_α(-k t^α)`, `r = (u₀ - 1)/u₀`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WestSeries {
    pub value: f64,
    pub tail_bound: f64,
    pub terms: usize,
}

pub fn west_series(alpha: f64, u0: f64, t: f64, terms: usize) -> Result<WestSeries> {
    if !(u0 > 0.5 && u0 < 1.0) {
        return Err(Error::DivergenceDomain(format!(
            "the West series needs u0 in (1/2, 1) so that |(u0-1)/u0| < 1, got {u0}"
        )));
    }
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("west series needs t ≥ 0, got {t}")));
    }
    if terms < 1 {
        return Err(Error::Domain("the West series needs K ≥ 1".into()));
    }
    let r = (u0 - 1.0) / u0;
    let ta = t.powf(alpha);
    let mut value = 0.0;
    let mut rk = 1.0;
    for k in 0..terms {
        value += rk * mittag_leffler(alpha, -(k as f64) * ta)?;
        rk *= r;
    }
    // E_α(-k t^α) is nonincreasing in k, so the remainder is below a geometric series.
    let tail_bound = rk.abs() * mittag_leffler(alpha, -(terms as f64) * ta)? / (1.0 - r.abs());
    Ok(WestSeries {
        value,
        tail_bound,
        terms,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RadiusMethod {
    Ratio,
    Root,
}

impl RadiusMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            RadiusMethod::Ratio => "ratio",
            RadiusMethod::Root => "root",
        }
    }
}

/// Empirical radius of `Σ_k E_k x^k / Γ(αk+1)` in the variable `x = t^α`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadiusEstimate {
    pub r: f64,
    pub method: RadiusMethod,
    pub ratio: f64,
    pub root: f64,
    /// Ratio and root estimates differ by more than 20%.
    pub unstable: bool,
}

/// Radius estimate using the coefficients' own `α` (1 when absent).
pub fn estimate_radius(coeffs: &SeriesCoefficients) -> Result<RadiusEstimate> {
    estimate_radius_in(coeffs, coeffs.alpha.unwrap_or(1.0))
}

pub fn estimate_radius_in(coeffs: &SeriesCoefficients, alpha: f64) -> Result<RadiusEstimate> {
    if coeffs.values.len() < 8 {
        return Err(Error::Domain(format!(
            "radius estimation needs at least 8 coefficients, got {}",
            coeffs.values.len()
        )));
    }
    // ln|c_k| for nonzero c_k = E_k / Γ(αk+1)
    let logs: Vec<(usize, f64)> = coeffs
        .values
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, e)| **e != 0.0)
        .map(|(k, e)| (k, e.abs().ln() - ln_gamma(alpha * k as f64 + 1.0)))
        .collect();
    let half = coeffs.values.len() / 2;
    if logs.iter().filter(|(k, _)| *k >= half).count() < 2 {
        return Err(Error::UndefinedRadius(
            "coefficient tail is identically zero".into(),
        ));
    }
    // local ratio estimates between consecutive nonzero coefficients
    let local: Vec<(usize, f64)> = logs
        .windows(2)
        .map(|w| {
            let (k0, l0) = w[0];
            let (k1, l1) = w[1];
            (k1, ((l0 - l1) / (k1 - k0) as f64).exp())
        })
        .collect();
    let (k_last, l_last) = *logs.last().unwrap();
    let root = (-l_last / k_last as f64).exp();
    let ratio = local.last().unwrap().1;

    // Super-geometric decay: the local estimates keep growing like a power of k.
    let tail: Vec<(usize, f64)> = local.iter().copied().filter(|(k, _)| *k >= half).collect();
    if tail.len() >= 3 {
        let increasing = tail.windows(2).all(|w| w[1].1 > w[0].1);
        let (ka, ra) = tail[0];
        let (kb, rb) = *tail.last().unwrap();
        let slope = (rb / ra).ln() / ((kb as f64) / (ka as f64)).ln();
        if increasing && slope > 0.05 {
            return Ok(RadiusEstimate {
                r: f64::INFINITY,
                method: RadiusMethod::Ratio,
                ratio: f64::INFINITY,
                root: f64::INFINITY,
                unstable: false,
            });
        }
    }
    let unstable = (ratio - root).abs() > 0.2 * ratio.min(root);
    let (r, method) = if ratio.is_finite() && ratio > 0.0 {
        (ratio, RadiusMethod::Ratio)
    } else {
        (root, RadiusMethod::Root)
    };
    Ok(RadiusEstimate {
        r,
        method,
        ratio,
        root,
        unstable,
    })
}
