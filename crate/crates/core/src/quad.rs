//! Adaptive Gauss–Kronrod quadrature.
//!
//! A global-subdivision 21-point Kronrod rule: the interval with the largest
//! error estimate is bisected until the summed estimate meets the tolerance.
//! Integrable endpoint singularities are handled by repeated bisection since
//! the rule never samples the endpoints. Semi-infinite ranges are mapped onto
//! `[0, 1)` with `x = a + u / (1 - u)`.

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_600_525_532_652,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Clone, Copy, Debug)]
pub struct Integral {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct Quadrature {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature {
            abs_tol: 1e-13,
            rel_tol: 1e-11,
            max_intervals: 4000,
        }
    }
}

#[derive(Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn kronrod21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[10];
    let mut gauss = 0.0;
    for j in 0..10 {
        let dx = half * XGK[j];
        let sum = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * sum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * sum;
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    (value, error)
}

impl Quadrature {
    pub fn with_tolerance(abs_tol: f64, rel_tol: f64) -> Self {
        Quadrature {
            abs_tol,
            rel_tol,
            ..Default::default()
        }
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> Result<Integral> {
        self.integrate_breaks(f, &[a, b])
    }

    /// Integrates over consecutive pieces `[p0, p1], [p1, p2], ...` so that known
    /// kinks or peaks start on a segment boundary.
    pub fn integrate_breaks<F: Fn(f64) -> f64>(&self, f: F, points: &[f64]) -> Result<Integral> {
        if points.len() < 2 {
            return Err(Error::Domain("quadrature needs at least two points".into()));
        }
        let mut segments: Vec<Segment> = Vec::with_capacity(64);
        let mut evaluations = 0;
        for w in points.windows(2) {
            let (a, b) = (w[0], w[1]);
            if !(a.is_finite() && b.is_finite()) || b < a {
                return Err(Error::Domain(format!("bad quadrature interval [{a}, {b}]")));
            }
            if b == a {
                continue;
            }
            let (value, error) = kronrod21(&f, a, b);
            evaluations += 21;
            segments.push(Segment { a, b, value, error });
        }
        loop {
            let total: f64 = segments.iter().map(|s| s.value).sum();
            let err: f64 = segments.iter().map(|s| s.error).sum();
            if !total.is_finite() || !err.is_finite() {
                return Err(Error::tolerance(
                    "non-finite integrand value",
                    vec![("evaluations".into(), evaluations as f64)],
                ));
            }
            if err <= self.abs_tol.max(self.rel_tol * total.abs()) {
                return Ok(Integral {
                    value: total,
                    error_estimate: err,
                    evaluations,
                });
            }
            if segments.len() >= self.max_intervals {
                return Err(Error::tolerance(
                    "adaptive quadrature did not converge",
                    vec![
                        ("value".into(), total),
                        ("error_estimate".into(), err),
                        ("intervals".into(), segments.len() as f64),
                    ],
                ));
            }
            let (idx, _) = segments
                .iter()
                .enumerate()
                .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
                .expect("nonempty");
            let seg = segments.swap_remove(idx);
            let mid = 0.5 * (seg.a + seg.b);
            if mid <= seg.a || mid >= seg.b {
                // Interval exhausted at machine resolution; keep its estimate as final.
                segments.push(Segment { error: 0.0, ..seg });
                continue;
            }
            let (v1, e1) = kronrod21(&f, seg.a, mid);
            let (v2, e2) = kronrod21(&f, mid, seg.b);
            evaluations += 42;
            segments.push(Segment {
                a: seg.a,
                b: mid,
                value: v1,
                error: e1,
            });
            segments.push(Segment {
                a: mid,
                b: seg.b,
                value: v2,
                error: e2,
            });
        }
    }

    /// Integrates `f` over `[a, ∞)`. For `a > 0` the substitution
    /// `x = a·e^{v}`, `v = w/(1-w)` turns power-law tails into exponential
    /// ones; otherwise `x = a + w/(1-w)`.
    pub fn integrate_to_infinity<F: Fn(f64) -> f64>(&self, f: F, a: f64) -> Result<Integral> {
        let g = |w: f64| {
            let one_minus = 1.0 - w;
            if one_minus <= 0.0 {
                return 0.0;
            }
            let v = w / one_minus;
            let (x, jac) = if a > 0.0 {
                let x = a * v.exp();
                (x, x)
            } else {
                (a + v, 1.0)
            };
            if !x.is_finite() {
                return 0.0;
            }
            let fx = f(x);
            if fx == 0.0 {
                0.0
            } else {
                fx * jac / (one_minus * one_minus)
            }
        };
        self.integrate(g, 0.0, 1.0)
    }

    /// Integrates over `[p0, p1], ..., [p_{n-1}, ∞)`.
    pub fn integrate_breaks_to_infinity<F: Fn(f64) -> f64>(
        &self,
        f: F,
        points: &[f64],
    ) -> Result<Integral> {
        let last = *points
            .last()
            .ok_or_else(|| Error::Domain("quadrature needs a start point".into()))?;
        let tail = self.integrate_to_infinity(&f, last)?;
        if points.len() < 2 {
            return Ok(tail);
        }
        let head = self.integrate_breaks(&f, points)?;
        Ok(Integral {
            value: head.value + tail.value,
            error_estimate: head.error_estimate + tail.error_estimate,
            evaluations: head.evaluations + tail.evaluations,
        })
    }
}

/// `lo, lo·ratio, lo·ratio², ...` up to and including `hi`, for breakpoints
/// that resolve power-law or exponential features spanning many scales.
pub fn geometric_points(lo: f64, hi: f64, ratio: f64) -> Vec<f64> {
    assert!(lo > 0.0 && ratio > 1.0);
    let mut out = vec![lo];
    let mut p = lo * ratio;
    while p < hi {
        out.push(p);
        p *= ratio;
    }
    if *out.last().unwrap() < hi {
        out.push(hi);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let q = Quadrature::default();
        let r = q.integrate(|x| x * x * x - 2.0 * x + 1.0, 0.0, 2.0).unwrap();
        assert!((r.value - 2.0).abs() < 1e-14);
    }

    #[test]
    fn endpoint_singularity() {
        let q = Quadrature::default();
        let r = q.integrate(|x| x.powf(-0.5), 0.0, 1.0).unwrap();
        assert!((r.value - 2.0).abs() < 1e-9, "{}", r.value);
    }

    #[test]
    fn semi_infinite_exponential() {
        let q = Quadrature::default();
        let r = q.integrate_to_infinity(|x| (-x).exp(), 0.0).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        let r = q
            .integrate_breaks_to_infinity(|x: f64| 1.0 / (1.0 + x * x), &[0.0, 1.0])
            .unwrap();
        assert!((r.value - std::f64::consts::FRAC_PI_2).abs() < 1e-10);
    }

    #[test]
    fn reports_non_convergence() {
        let q = Quadrature {
            max_intervals: 10,
            ..Default::default()
        };
        assert!(q.integrate(|x: f64| (1.0 / x).sin(), 1e-6, 1.0).is_err());
    }
}
