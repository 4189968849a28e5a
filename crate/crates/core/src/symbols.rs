//! Bernstein symbols `Φ(λ)` with zero drift and killing, their Lévy tails
//! `Π̄(z) = Π((z, ∞))`, and scalar functionals derived from them.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::RngCore;

use crate::error::{Error, Result};
use crate::quad::{geometric_points, Quadrature};
use crate::special::functions::{erfc, expint_e1, gamma, gamma_p, gamma_q};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    Identity,
    Stable,
    TemperedStable,
    Gamma,
    InverseGaussian,
    Custom,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Identity => "identity",
            Family::Stable => "stable",
            Family::TemperedStable => "tempered_stable",
            Family::Gamma => "gamma",
            Family::InverseGaussian => "inverse_gaussian",
            Family::Custom => "custom",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Family::Identity),
            "stable" => Ok(Family::Stable),
            "tempered_stable" | "tempered-stable" => Ok(Family::TemperedStable),
            "gamma" => Ok(Family::Gamma),
            "inverse_gaussian" | "inverse-gaussian" | "ig" => Ok(Family::InverseGaussian),
            "custom" => Ok(Family::Custom),
            other => Err(Error::ParameterDomain(format!("unknown family {other:?}"))),
        }
    }
}

pub type ScalarFn = dyn Fn(f64) -> f64 + Send + Sync;
pub type IncrementFn = dyn Fn(f64, &mut dyn RngCore) -> f64 + Send + Sync;

/// User-supplied symbol: evaluators for `Φ` and `Π̄`, the declared value of
/// `lim_{λ↓0} Φ(λ)/λ` and optionally a sampler for increments `H_{ds}`.
pub struct CustomSymbol {
    pub name: String,
    phi: Box<ScalarFn>,
    tail: Box<ScalarFn>,
    limit: f64,
    sampler: Option<Box<IncrementFn>>,
}

impl fmt::Debug for CustomSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomSymbol")
            .field("name", &self.name)
            .field("limit", &self.limit)
            .field("sampler", &self.sampler.is_some())
            .finish()
    }
}

#[derive(Clone, Debug)]
pub(crate) enum Kind {
    Identity,
    Stable { alpha: f64 },
    TemperedStable { alpha: f64, gamma: f64 },
    Gamma { a: f64, b: f64 },
    InverseGaussian { sigma: f64, mu: f64 },
    Custom(Arc<CustomSymbol>),
}

/// A Laplace exponent with `k = Φ(0) = 0` and `d = 0` (except the identity
/// symbol, kept as the pure-drift benchmark).
#[derive(Clone, Debug)]
pub struct SymbolSpec {
    kind: Kind,
}

fn positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::ParameterDomain(format!("{name} must be positive, got {value}")))
    }
}

fn unit_open(value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::ParameterDomain(format!("alpha must lie in (0, 1), got {value}")))
    }
}

impl SymbolSpec {
    pub fn identity() -> Self {
        SymbolSpec { kind: Kind::Identity }
    }

    pub fn stable(alpha: f64) -> Result<Self> {
        unit_open(alpha)?;
        Ok(SymbolSpec { kind: Kind::Stable { alpha } })
    }

    pub fn tempered_stable(alpha: f64, gamma: f64) -> Result<Self> {
        unit_open(alpha)?;
        positive("gamma", gamma)?;
        Ok(SymbolSpec {
            kind: Kind::TemperedStable { alpha, gamma },
        })
    }

    pub fn gamma(a: f64, b: f64) -> Result<Self> {
        positive("a", a)?;
        positive("b", b)?;
        Ok(SymbolSpec { kind: Kind::Gamma { a, b } })
    }

    pub fn inverse_gaussian(sigma: f64, mu: f64) -> Result<Self> {
        if sigma == 0.0 || !sigma.is_finite() {
            return Err(Error::ParameterDomain(format!("sigma must be nonzero, got {sigma}")));
        }
        positive("mu", mu)?;
        Ok(SymbolSpec {
            kind: Kind::InverseGaussian { sigma, mu },
        })
    }

    /// Custom symbol. The Lévy tail must reproduce `Φ(λ)/λ` through its
    /// Laplace transform at `λ ∈ {1, 2, 5}` to relative `1e-4`.
    pub fn custom(
        name: impl Into<String>,
        phi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        tail: impl Fn(f64) -> f64 + Send + Sync + 'static,
        limit: f64,
    ) -> Result<Self> {
        Self::build_custom(name.into(), Box::new(phi), Box::new(tail), limit, None)
    }

    pub fn custom_with_sampler(
        name: impl Into<String>,
        phi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        tail: impl Fn(f64) -> f64 + Send + Sync + 'static,
        limit: f64,
        sampler: impl Fn(f64, &mut dyn RngCore) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::build_custom(
            name.into(),
            Box::new(phi),
            Box::new(tail),
            limit,
            Some(Box::new(sampler)),
        )
    }

    fn build_custom(
        name: String,
        phi: Box<ScalarFn>,
        tail: Box<ScalarFn>,
        limit: f64,
        sampler: Option<Box<IncrementFn>>,
    ) -> Result<Self> {
        if !(limit > 0.0) {
            return Err(Error::ParameterDomain(format!(
                "declared limit of Φ(λ)/λ must be positive or +inf, got {limit}"
            )));
        }
        let spec = SymbolSpec {
            kind: Kind::Custom(Arc::new(CustomSymbol {
                name,
                phi,
                tail,
                limit,
                sampler,
            })),
        };
        spec.check_invariants()?;
        let kernel = TailKernel::new(&spec)?;
        for &lambda in &[1.0, 2.0, 5.0] {
            let laplace = kernel.laplace_of_tail(lambda)?;
            let target = spec.phi(lambda)? / lambda;
            if (laplace - target).abs() > 1e-4 * target.abs() {
                return Err(Error::tolerance(
                    "custom Lévy tail is inconsistent with Φ",
                    vec![
                        ("lambda".into(), lambda),
                        ("laplace_of_tail".into(), laplace),
                        ("phi_over_lambda".into(), target),
                    ],
                ));
            }
        }
        Ok(spec)
    }

    pub(crate) fn kind(&self) -> &Kind {
        &self.kind
    }

    pub fn family(&self) -> Family {
        match self.kind {
            Kind::Identity => Family::Identity,
            Kind::Stable { .. } => Family::Stable,
            Kind::TemperedStable { .. } => Family::TemperedStable,
            Kind::Gamma { .. } => Family::Gamma,
            Kind::InverseGaussian { .. } => Family::InverseGaussian,
            Kind::Custom(_) => Family::Custom,
        }
    }

    /// Stability index for the stable family.
    pub fn stable_alpha(&self) -> Option<f64> {
        match self.kind {
            Kind::Stable { alpha } => Some(alpha),
            _ => None,
        }
    }

    pub fn params(&self) -> Vec<(&'static str, f64)> {
        match &self.kind {
            Kind::Identity => vec![],
            Kind::Stable { alpha } => vec![("alpha", *alpha)],
            Kind::TemperedStable { alpha, gamma } => vec![("alpha", *alpha), ("gamma", *gamma)],
            Kind::Gamma { a, b } => vec![("a", *a), ("b", *b)],
            Kind::InverseGaussian { sigma, mu } => vec![("sigma", *sigma), ("mu", *mu)],
            Kind::Custom(c) => vec![("limit", c.limit)],
        }
    }

    /// `family=stable;alpha=0.5` style description.
    pub fn describe(&self) -> String {
        let mut out = format!("family={}", self.family());
        if let Kind::Custom(c) = &self.kind {
            out.push_str(&format!(";name={}", c.name));
        }
        for (k, v) in self.params() {
            out.push_str(&format!(";{k}={v}"));
        }
        out
    }

    /// `Φ(λ)` for `λ ≥ 0`.
    pub fn phi(&self, lambda: f64) -> Result<f64> {
        if !(lambda >= 0.0) {
            return Err(Error::Domain(format!("Φ needs λ ≥ 0, got {lambda}")));
        }
        Ok(self.phi_unchecked(lambda))
    }

    pub(crate) fn phi_unchecked(&self, lambda: f64) -> f64 {
        match &self.kind {
            Kind::Identity => lambda,
            Kind::Stable { alpha } => lambda.powf(*alpha),
            Kind::TemperedStable { alpha, gamma } => tempered_phi(*alpha, *gamma, lambda),
            Kind::Gamma { a, b } => a * (lambda / b).ln_1p(),
            Kind::InverseGaussian { sigma, mu } => {
                // σ⁻²(√(2λσ² + μ²) − μ) without cancellation at small λ
                2.0 * lambda / ((2.0 * lambda * sigma * sigma + mu * mu).sqrt() + mu)
            }
            Kind::Custom(c) => (c.phi)(lambda),
        }
    }

    /// Analytic continuation of `Φ` off the negative real axis, when known.
    pub fn phi_complex(&self, s: Complex64) -> Option<Complex64> {
        match &self.kind {
            Kind::Identity => Some(s),
            Kind::Stable { alpha } => Some(s.powf(*alpha)),
            Kind::TemperedStable { alpha, gamma } => {
                Some((s + gamma).powf(*alpha) - gamma.powf(*alpha))
            }
            Kind::Gamma { a, b } => Some((s / b + 1.0).ln() * a),
            Kind::InverseGaussian { sigma, mu } => {
                let s2 = sigma * sigma;
                Some(((s * (2.0 * s2) + mu * mu).sqrt() - mu) / s2)
            }
            Kind::Custom(_) => None,
        }
    }

    /// `Φ(λ)/λ` for `λ > 0`.
    pub fn phi_over_lambda(&self, lambda: f64) -> Result<f64> {
        if !(lambda > 0.0) {
            return Err(Error::Domain(format!("Φ(λ)/λ needs λ > 0, got {lambda}")));
        }
        Ok(self.phi_unchecked(lambda) / lambda)
    }

    /// `lim_{λ↓0} Φ(λ)/λ`, possibly `+∞`.
    pub fn phi_over_lambda_limit(&self) -> f64 {
        match &self.kind {
            Kind::Identity => 1.0,
            Kind::Stable { .. } => f64::INFINITY,
            Kind::TemperedStable { alpha, gamma } => alpha * gamma.powf(alpha - 1.0),
            Kind::Gamma { a, b } => a / b,
            Kind::InverseGaussian { mu, .. } => 1.0 / mu,
            Kind::Custom(c) => c.limit,
        }
    }

    /// Lévy density `π(z)` with `Π(dz) = π(z) dz`, for the named families.
    pub fn levy_density(&self, z: f64) -> Option<f64> {
        match &self.kind {
            Kind::Identity | Kind::Custom(_) => None,
            Kind::Stable { alpha } => Some(alpha / gamma(1.0 - alpha) * z.powf(-1.0 - alpha)),
            Kind::TemperedStable { alpha, gamma: g } => {
                Some(alpha / gamma(1.0 - alpha) * z.powf(-1.0 - alpha) * (-g * z).exp())
            }
            Kind::Gamma { a, b } => Some(a * (-b * z).exp() / z),
            Kind::InverseGaussian { sigma, mu } => {
                let c = mu * mu / (2.0 * sigma * sigma);
                Some((-c * z).exp() * z.powf(-1.5) / (sigma.abs() * (2.0 * std::f64::consts::PI).sqrt()))
            }
        }
    }

    pub(crate) fn custom_sampler(&self) -> Option<&IncrementFn> {
        match &self.kind {
            Kind::Custom(c) => c.sampler.as_deref(),
            _ => None,
        }
    }

    /// Checks `Φ(0) = 0`, monotonicity of `Φ` and of `Φ(λ)/λ` on a sampled grid.
    pub fn check_invariants(&self) -> Result<()> {
        let phi0 = self.phi_unchecked(0.0);
        if phi0.abs() > 1e-12 {
            return Err(Error::ParameterDomain(format!("Φ(0) = {phi0}, expected 0")));
        }
        let grid: Vec<f64> = (0..=80).map(|i| 10f64.powf(-4.0 + i as f64 * 0.1)).collect();
        let mut prev_phi = 0.0;
        let mut prev_ratio = f64::INFINITY;
        for &lambda in &grid {
            let p = self.phi_unchecked(lambda);
            let ratio = p / lambda;
            if !p.is_finite() || p < prev_phi * (1.0 - 1e-12) {
                return Err(Error::ParameterDomain(format!(
                    "Φ is not nondecreasing near λ = {lambda}"
                )));
            }
            if ratio > prev_ratio * (1.0 + 1e-9) {
                return Err(Error::ParameterDomain(format!(
                    "Φ(λ)/λ is not nonincreasing near λ = {lambda}"
                )));
            }
            prev_phi = p;
            prev_ratio = ratio;
        }
        Ok(())
    }
}

fn tempered_phi(alpha: f64, gamma: f64, lambda: f64) -> f64 {
    gamma.powf(alpha) * (alpha * (lambda / gamma).ln_1p()).exp_m1()
}

/// Tail of the tempered stable Lévy measure,
/// `Π̄(z) = z^{-α} e^{-γz} / Γ(1-α) − γ^α Q(1-α, γz)`.
fn tempered_tail(alpha: f64, g: f64, z: f64) -> f64 {
    z.powf(-alpha) * (-g * z).exp() / gamma(1.0 - alpha) - g.powf(alpha) * gamma_q(1.0 - alpha, g * z)
}

/// `∫₀^x Π̄ = x Π̄(x) + ∫₀^x y π(y) dy` for tempered stable.
fn tempered_integrated(alpha: f64, g: f64, x: f64, tail_x: f64) -> f64 {
    x * tail_x + alpha * g.powf(alpha - 1.0) * gamma_p(1.0 - alpha, g * x)
}

// Beyond this tempering argument the closed-form tail loses digits to
// cancellation and the density quadrature takes over.
const TEMPERED_CLOSED_FORM_LIMIT: f64 = 30.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalMode {
    ClosedForm,
    Quadrature,
}

/// The Lévy tail `Π̄` of a symbol, evaluated in closed form where one is
/// available or by quadrature of the Lévy density.
#[derive(Clone, Debug)]
pub struct TailKernel {
    spec: SymbolSpec,
    mode: EvalMode,
    quad: Quadrature,
}

/// Cell integrals `∫_{m·dt}^{(m+1)·dt} Π̄(z) dz` for `m = 0..len`.
#[derive(Clone, Debug)]
pub struct TailTable {
    pub dt: f64,
    pub cells: Vec<f64>,
}

impl TailKernel {
    pub fn new(spec: &SymbolSpec) -> Result<Self> {
        Self::with_mode(spec, EvalMode::ClosedForm)
    }

    pub fn with_mode(spec: &SymbolSpec, mode: EvalMode) -> Result<Self> {
        if spec.family() == Family::Identity {
            return Err(Error::FamilyMismatch(
                "the identity symbol is a pure drift and has no Lévy tail".into(),
            ));
        }
        if mode == EvalMode::Quadrature && spec.family() == Family::Custom {
            return Err(Error::Capability(
                "custom symbols provide their tail directly; no density to integrate".into(),
            ));
        }
        Ok(TailKernel {
            spec: spec.clone(),
            mode,
            quad: Quadrature::with_tolerance(1e-14, 1e-11),
        })
    }

    pub fn spec(&self) -> &SymbolSpec {
        &self.spec
    }

    pub fn mode(&self) -> EvalMode {
        self.mode
    }

    /// `Π̄(z)` for `z > 0`.
    pub fn tail(&self, z: f64) -> Result<f64> {
        if !(z > 0.0) {
            return Err(Error::Domain(format!("Lévy tail needs z > 0, got {z}")));
        }
        if z.is_infinite() {
            return Ok(0.0);
        }
        if self.mode == EvalMode::Quadrature {
            return self.tail_by_quadrature(z);
        }
        let value = match self.spec.kind() {
            Kind::Identity => unreachable!("rejected at construction"),
            Kind::Stable { alpha } => z.powf(-alpha) / gamma(1.0 - alpha),
            Kind::Gamma { a, b } => a * expint_e1(b * z),
            Kind::TemperedStable { alpha, gamma: g } => {
                if g * z > TEMPERED_CLOSED_FORM_LIMIT {
                    return self.tail_by_quadrature(z);
                }
                tempered_tail(*alpha, *g, z)
            }
            Kind::InverseGaussian { sigma, mu } => {
                let c = mu * mu / (2.0 * sigma * sigma);
                if c * z > TEMPERED_CLOSED_FORM_LIMIT {
                    return self.tail_by_quadrature(z);
                }
                let k = std::f64::consts::SQRT_2 / sigma.abs();
                k * ((-c * z).exp() / (std::f64::consts::PI * z).sqrt() - c.sqrt() * erfc((c * z).sqrt()))
            }
            Kind::Custom(c) => (c.tail)(z),
        };
        Ok(value.max(0.0))
    }

    fn tail_by_quadrature(&self, z: f64) -> Result<f64> {
        let spec = &self.spec;
        let density = |y: f64| spec.levy_density(y).unwrap_or(0.0);
        let mut points = geometric_points(z, 64.0 * z.max(1.0), 2.0);
        if let Some(rate) = self.decay_rate() {
            points.push(z + 1.0 / rate);
            points.push(z + 8.0 / rate);
            points.sort_by(f64::total_cmp);
        }
        let r = self.quad.integrate_breaks_to_infinity(density, &points)?;
        Ok(r.value.max(0.0))
    }

    /// Exponential decay rate of the Lévy density, if any.
    fn decay_rate(&self) -> Option<f64> {
        match self.spec.kind() {
            Kind::TemperedStable { gamma: g, .. } => Some(*g),
            Kind::Gamma { b, .. } => Some(*b),
            Kind::InverseGaussian { sigma, mu } => Some(mu * mu / (2.0 * sigma * sigma)),
            _ => None,
        }
    }

    /// `∫₀^x Π̄(z) dz`.
    pub fn integrated_tail(&self, x: f64) -> Result<f64> {
        if x < 0.0 {
            return Err(Error::Domain(format!("integrated tail needs x ≥ 0, got {x}")));
        }
        if x == 0.0 {
            return Ok(0.0);
        }
        if self.mode == EvalMode::Quadrature {
            let spec = &self.spec;
            let mut points = vec![0.0];
            points.extend(geometric_points(x * 2f64.powi(-60), x, 2.0));
            let first_moment = self
                .quad
                .integrate_breaks(|y: f64| y * spec.levy_density(y).unwrap_or(0.0), &points)?;
            return Ok(x * self.tail(x)? + first_moment.value);
        }
        let value = match self.spec.kind() {
            Kind::Identity => unreachable!("rejected at construction"),
            Kind::Stable { alpha } => x.powf(1.0 - alpha) / gamma(2.0 - alpha),
            Kind::Gamma { a, b } => a * (x * expint_e1(b * x) - (-b * x).exp_m1() / b),
            Kind::TemperedStable { alpha, gamma: g } => {
                tempered_integrated(*alpha, *g, x, self.tail(x)?)
            }
            Kind::InverseGaussian { sigma, mu } => {
                let c = mu * mu / (2.0 * sigma * sigma);
                let k = std::f64::consts::SQRT_2 / sigma.abs();
                x * self.tail(x)? + k * 0.5 / c.sqrt() * gamma_p(0.5, c * x)
            }
            Kind::Custom(c) => {
                let tail = &c.tail;
                let mut points = vec![0.0];
                points.extend(geometric_points(x * 2f64.powi(-60), x, 2.0));
                self.quad.integrate_breaks(|z: f64| tail(z), &points)?.value
            }
        };
        Ok(value)
    }

    /// Cell integrals of `Π̄` on the uniform grid with step `dt`.
    pub fn tabulate(&self, dt: f64, len: usize) -> Result<TailTable> {
        if !(dt > 0.0) {
            return Err(Error::Domain(format!("cell width must be positive, got {dt}")));
        }
        let mut cells = Vec::with_capacity(len);
        let mut prev = 0.0;
        for m in 0..len {
            let next = self.integrated_tail((m + 1) as f64 * dt)?;
            cells.push((next - prev).max(0.0));
            prev = next;
        }
        Ok(TailTable { dt, cells })
    }

    /// `∫₀^∞ e^{-λz} Π̄(z) dz` by quadrature.
    pub fn laplace_of_tail(&self, lambda: f64) -> Result<f64> {
        let mut points = vec![0.0];
        points.extend(geometric_points(2f64.powi(-60), 1.0 / lambda, 4.0));
        let f = |z: f64| {
            if z <= 0.0 {
                return 0.0;
            }
            let e = (-lambda * z).exp();
            if e == 0.0 {
                0.0
            } else {
                e * self.tail(z).unwrap_or(f64::NAN)
            }
        };
        Ok(self
            .quad
            .integrate_breaks_to_infinity(f, &points)?
            .value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn named() -> Vec<SymbolSpec> {
        vec![
            SymbolSpec::stable(0.5).unwrap(),
            SymbolSpec::stable(0.3).unwrap(),
            SymbolSpec::tempered_stable(0.5, 1.0).unwrap(),
            SymbolSpec::tempered_stable(0.7, 2.5).unwrap(),
            SymbolSpec::gamma(1.0, 1.0).unwrap(),
            SymbolSpec::gamma(2.0, 4.0).unwrap(),
            SymbolSpec::inverse_gaussian(1.0, 2.0).unwrap(),
            SymbolSpec::inverse_gaussian(-0.5, 1.0).unwrap(),
        ]
    }

    #[test]
    fn phi_examples() {
        assert!((SymbolSpec::stable(0.5).unwrap().phi(4.0).unwrap() - 2.0).abs() < 1e-15);
        let e = std::f64::consts::E;
        assert!((SymbolSpec::gamma(1.0, 1.0).unwrap().phi(e - 1.0).unwrap() - 1.0).abs() < 1e-15);
        let ts = SymbolSpec::tempered_stable(0.5, 1.0).unwrap();
        assert!((ts.phi(3.0).unwrap() - 1.0).abs() < 1e-15);
        let ig = SymbolSpec::inverse_gaussian(1.0, 2.0).unwrap();
        let direct = ((2.0f64 * 3.0 + 4.0).sqrt() - 2.0) / 1.0;
        assert!((ig.phi(3.0).unwrap() - direct).abs() < 1e-14);
        assert_eq!(SymbolSpec::identity().phi(2.5).unwrap(), 2.5);
    }

    #[test]
    fn parameter_validation() {
        assert!(matches!(SymbolSpec::stable(1.0), Err(Error::ParameterDomain(_))));
        assert!(SymbolSpec::stable(0.0).is_err());
        assert!(SymbolSpec::gamma(0.0, 1.0).is_err());
        assert!(SymbolSpec::gamma(1.0, -1.0).is_err());
        assert!(SymbolSpec::tempered_stable(0.5, 0.0).is_err());
        assert!(SymbolSpec::inverse_gaussian(0.0, 1.0).is_err());
        assert!(SymbolSpec::inverse_gaussian(1.0, 0.0).is_err());
        assert!(SymbolSpec::stable(0.5).unwrap().phi(-1.0).is_err());
    }

    #[test]
    fn small_lambda_limits() {
        let lambda = 1e-10;
        for spec in named() {
            let numeric = spec.phi_over_lambda(lambda).unwrap();
            let limit = spec.phi_over_lambda_limit();
            if limit.is_finite() {
                assert!((numeric - limit).abs() < 1e-6 * limit, "{}", spec.describe());
            } else {
                assert!(numeric > 1e4);
            }
        }
        assert_eq!(SymbolSpec::gamma(2.0, 4.0).unwrap().phi_over_lambda_limit(), 0.5);
        assert_eq!(SymbolSpec::inverse_gaussian(1.0, 2.0).unwrap().phi_over_lambda_limit(), 0.5);
        assert!(SymbolSpec::stable(0.5).unwrap().phi_over_lambda_limit().is_infinite());
        assert_eq!(SymbolSpec::identity().phi_over_lambda_limit(), 1.0);
    }

    #[test]
    fn tail_examples() {
        let stable = TailKernel::new(&SymbolSpec::stable(0.5).unwrap()).unwrap();
        assert!((stable.tail(1.0).unwrap() - 1.0 / std::f64::consts::PI.sqrt()).abs() < 1e-15);
        let g = TailKernel::new(&SymbolSpec::gamma(1.0, 1.0).unwrap()).unwrap();
        assert!((g.tail(1.0).unwrap() - 0.219_383_934_395_520_3).abs() < 1e-13);
        assert!(g.tail(0.0).is_err());
        for spec in named() {
            let k = TailKernel::new(&spec).unwrap();
            assert!(k.tail(1e6).unwrap() < 2e-2);
        }
    }

    #[test]
    fn identity_rejects_tail() {
        assert!(matches!(
            TailKernel::new(&SymbolSpec::identity()),
            Err(Error::FamilyMismatch(_))
        ));
    }

    #[test]
    fn closed_form_and_quadrature_tails_agree() {
        for spec in named() {
            let closed = TailKernel::new(&spec).unwrap();
            let quad = TailKernel::with_mode(&spec, EvalMode::Quadrature).unwrap();
            for &z in &[1e-3, 0.1, 1.0, 3.0, 20.0] {
                let a = closed.tail(z).unwrap();
                let b = quad.tail(z).unwrap();
                assert!((a - b).abs() < 1e-8 * a.max(1.0), "{} z={z}: {a} vs {b}", spec.describe());
                let ia = closed.integrated_tail(z).unwrap();
                let ib = quad.integrated_tail(z).unwrap();
                assert!((ia - ib).abs() < 1e-8 * ia.max(1.0), "{} z={z}: {ia} vs {ib}", spec.describe());
            }
        }
    }

    #[test]
    fn laplace_consistency_of_tails() {
        for spec in named() {
            let kernel = TailKernel::new(&spec).unwrap();
            for &lambda in &[0.1, 0.5, 1.0, 2.0, 5.0, 10.0] {
                let got = kernel.laplace_of_tail(lambda).unwrap();
                let expected = spec.phi_over_lambda(lambda).unwrap();
                assert!(
                    (got - expected).abs() < 1e-6 * expected,
                    "{} λ={lambda}: {got} vs {expected}",
                    spec.describe()
                );
            }
        }
    }

    #[test]
    fn phi_is_monotone_and_concave() {
        for spec in named() {
            spec.check_invariants().unwrap();
            let h = 1e-2;
            for i in 1..1000 {
                let l = i as f64 * h;
                let second = spec.phi(l + h).unwrap() - 2.0 * spec.phi(l).unwrap()
                    + spec.phi(l - h).unwrap();
                assert!(second <= 1e-12, "{} λ={l}", spec.describe());
            }
        }
    }

    #[test]
    fn custom_symbol_is_checked_against_its_tail() {
        // A rescaled stable symbol 2λ^{1/2}
        let good = SymbolSpec::custom(
            "scaled-stable",
            |l| 2.0 * l.sqrt(),
            |z| 2.0 / (std::f64::consts::PI * z).sqrt(),
            f64::INFINITY,
        );
        assert!(good.is_ok());
        let bad = SymbolSpec::custom(
            "mismatched",
            |l| 2.0 * l.sqrt(),
            |z| 1.0 / (std::f64::consts::PI * z).sqrt(),
            f64::INFINITY,
        );
        assert!(matches!(bad, Err(Error::NumericalTolerance { .. })));
    }

    #[test]
    fn complex_continuation_matches_real_axis() {
        for spec in named() {
            for &l in &[0.3, 1.0, 7.0] {
                let c = spec.phi_complex(Complex64::new(l, 0.0)).unwrap();
                assert!((c.re - spec.phi(l).unwrap()).abs() < 1e-13 * c.re.abs().max(1.0));
                assert!(c.im.abs() < 1e-14);
            }
        }
    }
}
