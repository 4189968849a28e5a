//! Special-function layer: Mittag-Leffler evaluation, the inverse stable
//! density, numerical Laplace inversion and the rescaled moments
//! `φ_k(t) = E[L_t^k] / k!`.

pub mod functions;
pub mod laplace;
pub mod mittag_leffler;
pub mod stable_density;

use num_complex::Complex64;

pub use laplace::{laplace_invert, InversionMethod, LaplaceTransform};
pub use mittag_leffler::mittag_leffler;
pub use stable_density::{inv_stable_density, inv_stable_density_traced};

use crate::error::{Error, Result};
use crate::symbols::{Family, SymbolSpec};
use functions::ln_gamma;

/// The transform `λ ↦ 1 / (λ Φ(λ)^k)` of `φ_k`.
pub struct MomentTransform<'a> {
    pub spec: &'a SymbolSpec,
    pub k: u32,
}

impl LaplaceTransform for MomentTransform<'_> {
    fn eval(&self, lambda: f64) -> f64 {
        1.0 / (lambda * self.spec.phi_unchecked(lambda).powi(self.k as i32))
    }

    fn eval_complex(&self, lambda: Complex64) -> Option<Complex64> {
        let phi = self.spec.phi_complex(lambda)?;
        Some((lambda * phi.powi(self.k as i32)).inv())
    }
}

/// Rescaled moment `φ_k(t)`; closed forms for the identity and stable symbols,
/// Gaver–Stehfest inversion otherwise.
pub fn moment_phi_k(spec: &SymbolSpec, k: u32, t: f64) -> Result<f64> {
    moment_phi_k_with(spec, k, t, InversionMethod::GaverStehfest)
}

pub fn moment_phi_k_with(
    spec: &SymbolSpec,
    k: u32,
    t: f64,
    method: InversionMethod,
) -> Result<f64> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("φ_k needs t ≥ 0, got {t}")));
    }
    if k == 0 {
        return Ok(1.0);
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let kf = k as f64;
    match spec.family() {
        Family::Identity => Ok((kf * t.ln() - ln_gamma(kf + 1.0)).exp()),
        Family::Stable => {
            let alpha = spec.stable_alpha().expect("stable");
            Ok((alpha * kf * t.ln() - ln_gamma(alpha * kf + 1.0)).exp())
        }
        _ => laplace_invert(&MomentTransform { spec, k }, t, method).map_err(|e| match e {
            Error::NumericalTolerance {
                message,
                mut diagnostics,
            } => {
                diagnostics.push(("k".into(), kf));
                Error::NumericalTolerance {
                    message: format!("φ_{k} for {}: {message}", spec.describe()),
                    diagnostics,
                }
            }
            other => other,
        }),
    }
}

/// Tabulated `φ_k` on a time grid.
#[derive(Clone, Debug)]
pub struct MomentLadder {
    pub order: u32,
    pub t_grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl MomentLadder {
    pub fn new(spec: &SymbolSpec, order: u32, t_grid: &[f64]) -> Result<Self> {
        let values = t_grid
            .iter()
            .map(|&t| moment_phi_k(spec, order, t))
            .collect::<Result<Vec<_>>>()?;
        Ok(MomentLadder {
            order,
            t_grid: t_grid.to_vec(),
            values,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::Quadrature;

    #[test]
    fn closed_forms() {
        let id = SymbolSpec::identity();
        assert!((moment_phi_k(&id, 3, 2.0).unwrap() - 8.0 / 6.0).abs() < 1e-14);
        let st = SymbolSpec::stable(0.5).unwrap();
        assert!((moment_phi_k(&st, 1, 1.0).unwrap() - 1.128_379_167_095_512_6).abs() < 1e-14);
        assert_eq!(moment_phi_k(&st, 0, 3.0).unwrap(), 1.0);
        assert_eq!(moment_phi_k(&st, 2, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn inversion_reproduces_stable_closed_form() {
        let st = SymbolSpec::stable(0.5).unwrap();
        for k in 1..=3 {
            for &t in &[0.5, 1.0, 2.0] {
                let exact = moment_phi_k(&st, k, t).unwrap();
                let transform = MomentTransform { spec: &st, k };
                let gs = laplace_invert(&transform, t, InversionMethod::GaverStehfest).unwrap();
                let tb = laplace_invert(&transform, t, InversionMethod::Talbot).unwrap();
                assert!((gs - exact).abs() < 1e-6 * exact, "k={k} t={t}: {gs} vs {exact}");
                assert!((tb - exact).abs() < 1e-9 * exact, "k={k} t={t}: {tb} vs {exact}");
            }
        }
    }

    #[test]
    fn inverters_agree_on_gamma_moments() {
        let g = SymbolSpec::gamma(1.0, 1.0).unwrap();
        for k in 1..=3 {
            for &t in &[0.5, 1.0, 2.0] {
                let gs = moment_phi_k_with(&g, k, t, InversionMethod::GaverStehfest).unwrap();
                let tb = moment_phi_k_with(&g, k, t, InversionMethod::Talbot).unwrap();
                assert!((gs - tb).abs() < 1e-5 * tb, "k={k} t={t}: {gs} vs {tb}");
            }
        }
    }

    #[test]
    fn transform_ladder_identity() {
        // Φ(λ) · 1/(λΦ^k) = 1/(λΦ^{k-1})
        let specs = [
            SymbolSpec::stable(0.4).unwrap(),
            SymbolSpec::gamma(1.0, 2.0).unwrap(),
            SymbolSpec::inverse_gaussian(1.0, 1.0).unwrap(),
            SymbolSpec::tempered_stable(0.6, 1.0).unwrap(),
        ];
        for spec in &specs {
            for k in 1..=3u32 {
                for &l in &[0.2, 1.0, 4.0] {
                    let fk = MomentTransform { spec, k }.eval(l);
                    let fk1 = MomentTransform { spec, k: k - 1 }.eval(l);
                    let lhs = spec.phi(l).unwrap() * fk;
                    assert!((lhs - fk1).abs() <= 1e-14 * fk1.abs());
                }
            }
        }
    }

    #[test]
    fn inverse_stable_density_moments() {
        let quad = Quadrature::with_tolerance(1e-12, 1e-10);
        for &alpha in &[0.3, 0.5, 0.8] {
            let t: f64 = 1.0;
            for k in 0..=2 {
                let m = quad
                    .integrate_breaks_to_infinity(
                        |x: f64| {
                            if x <= 0.0 {
                                return 0.0;
                            }
                            let d = inv_stable_density(alpha, t, x).unwrap();
                            if d == 0.0 {
                                0.0
                            } else {
                                x.powi(k) * d
                            }
                        },
                        &[0.0, 1.0, 4.0],
                    )
                    .unwrap()
                    .value;
                let expected = functions::gamma(k as f64 + 1.0) / functions::gamma(alpha * k as f64 + 1.0);
                assert!(
                    (m - expected).abs() < 1e-6 * expected,
                    "alpha={alpha} k={k}: {m} vs {expected}"
                );
            }
        }
    }

    #[test]
    fn mittag_leffler_is_completely_monotone_on_samples() {
        for &alpha in &[0.2, 0.5, 0.9] {
            let mut prev = 1.0;
            for i in 0..200 {
                let x = i as f64 * 0.25;
                let v = mittag_leffler(alpha, -x).unwrap();
                assert!(v > 0.0 && v <= 1.0);
                assert!(v <= prev + 1e-14);
                prev = v;
            }
        }
    }
}
