//! Subordinator sample paths on a uniform operational-time grid, their
//! right-continuous inverse `L_t = inf{s : H_s ≥ t}` and time-changed
//! trajectories `v(L_t)`.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, InverseGaussian, StandardNormal};

use crate::error::{Error, Result};
use crate::growth::logistic_curve;
use crate::special::stable_density::zolotarev_a;
use crate::symbols::{Family, Kind, SymbolSpec};

/// RNG for the path with the given index under a master seed. Every path owns
/// its own ChaCha stream so results do not depend on how paths are scheduled.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// A draw of the positive stable law with `E[e^{-λS}] = e^{-λ^α}` (Kanter).
pub fn positive_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let u = loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            break u * PI;
        }
    };
    let e: f64 = Exp1.sample(rng);
    (zolotarev_a(alpha, u) / e).powf((1.0 - alpha) / alpha)
}

#[derive(Clone, Debug)]
enum Increment {
    Drift,
    // α = 1/2: S = 1 / (2 Z²)
    StableHalf { scale: f64 },
    Stable { alpha: f64, scale: f64 },
    Tempered { alpha: f64, gamma: f64, scale: f64 },
    Gamma(Gamma<f64>),
    InverseGaussian(InverseGaussian<f64>),
    Custom,
}

/// Sampler for `H_{ds}` under a given symbol.
#[derive(Clone, Debug)]
pub struct IncrementSampler {
    spec: SymbolSpec,
    ds: f64,
    kind: Increment,
}

impl IncrementSampler {
    pub fn new(spec: &SymbolSpec, ds: f64) -> Result<Self> {
        if !(ds > 0.0 && ds.is_finite()) {
            return Err(Error::Domain(format!("ds must be positive, got {ds}")));
        }
        let kind = match spec.kind() {
            Kind::Identity => Increment::Drift,
            Kind::Stable { alpha } => {
                let scale = ds.powf(1.0 / alpha);
                if *alpha == 0.5 {
                    Increment::StableHalf { scale }
                } else {
                    Increment::Stable {
                        alpha: *alpha,
                        scale,
                    }
                }
            }
            Kind::TemperedStable { alpha, gamma } => Increment::Tempered {
                alpha: *alpha,
                gamma: *gamma,
                scale: ds.powf(1.0 / alpha),
            },
            Kind::Gamma { a, b } => Increment::Gamma(
                Gamma::new(a * ds, 1.0 / b)
                    .map_err(|e| Error::ParameterDomain(format!("gamma increment: {e}")))?,
            ),
            Kind::InverseGaussian { sigma, mu } => Increment::InverseGaussian(
                InverseGaussian::new(ds / mu, ds * ds / (sigma * sigma))
                    .map_err(|e| Error::ParameterDomain(format!("inverse Gaussian increment: {e}")))?,
            ),
            Kind::Custom(_) => {
                if spec.custom_sampler().is_none() {
                    return Err(Error::Capability(format!(
                        "custom symbol {} has no increment sampler",
                        spec.describe()
                    )));
                }
                Increment::Custom
            }
        };
        Ok(IncrementSampler {
            spec: spec.clone(),
            ds,
            kind,
        })
    }

    pub fn ds(&self) -> f64 {
        self.ds
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self.kind, Increment::Drift)
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            Increment::Drift => self.ds,
            Increment::StableHalf { scale } => {
                let z: f64 = StandardNormal.sample(rng);
                scale / (2.0 * z * z)
            }
            Increment::Stable { alpha, scale } => scale * positive_stable(*alpha, rng),
            Increment::Tempered {
                alpha,
                gamma,
                scale,
            } => loop {
                let x = scale * positive_stable(*alpha, rng);
                let u: f64 = rng.random();
                if u < (-gamma * x).exp() {
                    break x;
                }
            },
            Increment::Gamma(g) => g.sample(rng),
            Increment::InverseGaussian(ig) => ig.sample(rng),
            Increment::Custom => {
                let sampler = self.spec.custom_sampler().expect("checked at construction");
                sampler(self.ds, rng)
            }
        }
    }
}

/// `H` on `{0, ds, 2ds, ..., s_max}`.
#[derive(Clone, Debug)]
pub struct SamplePath {
    ds: f64,
    values: Vec<f64>,
    spec: SymbolSpec,
    seed: u64,
}

fn extend(
    values: &mut Vec<f64>,
    sampler: &IncrementSampler,
    rng: &mut ChaCha8Rng,
    steps: usize,
) -> Result<()> {
    values.reserve(steps);
    let mut h = *values.last().expect("H(0) present");
    for _ in 0..steps {
        if sampler.is_deterministic() {
            h = values.len() as f64 * sampler.ds;
        } else {
            let inc = sampler.sample(rng);
            if !(inc >= 0.0) || !inc.is_finite() {
                return Err(Error::tolerance(
                    "subordinator increment is negative or non-finite",
                    vec![("increment".into(), inc), ("step".into(), values.len() as f64)],
                ));
            }
            h += inc;
        }
        values.push(h);
    }
    Ok(())
}

/// Simulates `H` on `[0, s_max]` with step `ds`.
pub fn sample_subordinator(spec: &SymbolSpec, ds: f64, s_max: f64, seed: u64) -> Result<SamplePath> {
    if !(s_max >= ds) {
        return Err(Error::Domain(format!("s_max = {s_max} must be at least ds = {ds}")));
    }
    let sampler = IncrementSampler::new(spec, ds)?;
    let steps = grid_steps(s_max, ds);
    let mut rng = path_rng(seed, 0);
    let mut values = vec![0.0];
    extend(&mut values, &sampler, &mut rng, steps)?;
    Ok(SamplePath {
        ds,
        values,
        spec: spec.clone(),
        seed,
    })
}

/// Simulates `H` from `[0, s_init]` and doubles the horizon until `H(s_max) ≥ level`.
/// The RNG stream continues across doublings, so the result is a prefix of
/// one long simulation.
pub fn sample_subordinator_to_level(
    spec: &SymbolSpec,
    ds: f64,
    s_init: f64,
    level: f64,
    seed: u64,
    max_doublings: u32,
) -> Result<SamplePath> {
    if !(s_init >= ds) {
        return Err(Error::Domain(format!("s_init = {s_init} must be at least ds = {ds}")));
    }
    let sampler = IncrementSampler::new(spec, ds)?;
    let mut rng = path_rng(seed, 0);
    let mut values = vec![0.0];
    extend(&mut values, &sampler, &mut rng, grid_steps(s_init, ds))?;
    let mut doublings = 0;
    while *values.last().unwrap() < level {
        if doublings == max_doublings {
            let s_max = (values.len() - 1) as f64 * ds;
            return Err(Error::HorizonExceeded {
                level,
                s_max,
                reached: *values.last().unwrap(),
                suggested: 2.0 * s_max,
            });
        }
        let steps = values.len() - 1;
        extend(&mut values, &sampler, &mut rng, steps)?;
        doublings += 1;
    }
    Ok(SamplePath {
        ds,
        values,
        spec: spec.clone(),
        seed,
    })
}

pub(crate) fn grid_steps(s_max: f64, ds: f64) -> usize {
    (s_max / ds - 1e-9).ceil().max(1.0) as usize
}

impl SamplePath {
    /// Builds a path from explicit values; `values[0]` must be 0 and the
    /// sequence nondecreasing.
    pub fn from_values(spec: &SymbolSpec, ds: f64, values: Vec<f64>) -> Result<Self> {
        if values.first() != Some(&0.0) {
            return Err(Error::Domain("a subordinator path starts at H(0) = 0".into()));
        }
        if values.windows(2).any(|w| !(w[1] >= w[0])) {
            return Err(Error::Domain("path values must be nondecreasing".into()));
        }
        Ok(SamplePath {
            ds,
            values,
            spec: spec.clone(),
            seed: 0,
        })
    }

    pub fn ds(&self) -> f64 {
        self.ds
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn spec(&self) -> &SymbolSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn s_max(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.ds
    }

    pub fn s_at(&self, index: usize) -> f64 {
        index as f64 * self.ds
    }

    /// `H(s_max)`, the largest wall-clock time the path can invert.
    pub fn horizon(&self) -> f64 {
        *self.values.last().expect("nonempty")
    }

    fn horizon_error(&self, t: f64) -> Error {
        Error::HorizonExceeded {
            level: t,
            s_max: self.s_max(),
            reached: self.horizon(),
            suggested: 2.0 * self.s_max(),
        }
    }
}

/// Smallest grid point `s` with `H(s) ≥ t`.
pub fn inverse_path(path: &SamplePath, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("inverse needs t ≥ 0, got {t}")));
    }
    if t > path.horizon() {
        return Err(path.horizon_error(t));
    }
    let idx = path.values.partition_point(|&h| h < t);
    Ok(path.s_at(idx))
}

/// Inverse at every point of a nondecreasing `t_grid` with one merged sweep.
pub fn inverse_on_grid(path: &SamplePath, t_grid: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(t_grid.len());
    let mut idx = 0;
    let mut prev_t = f64::NEG_INFINITY;
    for &t in t_grid {
        if !(t >= prev_t) || t < 0.0 {
            return Err(Error::Domain("t_grid must be nonnegative and nondecreasing".into()));
        }
        if t > path.horizon() {
            return Err(path.horizon_error(t));
        }
        while path.values[idx] < t {
            idx += 1;
        }
        out.push(path.s_at(idx));
        prev_t = t;
    }
    Ok(out)
}

/// `(L_t, v(L_t))` on a wall-clock grid.
#[derive(Clone, Debug)]
pub struct TimeChangedPath {
    pub t_grid: Vec<f64>,
    pub l_values: Vec<f64>,
    pub v_of_l: Vec<f64>,
    pub ds: f64,
    pub seed: u64,
}

pub fn time_changed_path(
    path: &SamplePath,
    v: impl Fn(f64) -> f64,
    t_grid: &[f64],
) -> Result<TimeChangedPath> {
    let l_values = inverse_on_grid(path, t_grid)?;
    let v_of_l = l_values.iter().map(|&l| v(l)).collect();
    Ok(TimeChangedPath {
        t_grid: t_grid.to_vec(),
        l_values,
        v_of_l,
        ds: path.ds,
        seed: path.seed,
    })
}

impl TimeChangedPath {
    /// Longest stretch of wall-clock time over which `v(L_t)` stays constant.
    pub fn longest_plateau(&self) -> f64 {
        let mut best = 0.0f64;
        let mut start = 0;
        for j in 1..=self.v_of_l.len() {
            if j == self.v_of_l.len() || self.v_of_l[j] != self.v_of_l[start] {
                best = best.max(self.t_grid[j - 1] - self.t_grid[start]);
                start = j;
            }
        }
        best
    }
}

/// Data behind the three-panel illustration of the delaying effect of `L`:
/// the logistic curve on `(0, s_max)`, one inverse path on `(0, T]` with
/// `T = H(s_max)` (or a requested horizon), and the composition `v(L_t)`.
#[derive(Clone, Debug)]
pub struct DelayFigure {
    pub v0: f64,
    pub alpha: f64,
    pub s_grid: Vec<f64>,
    pub v_values: Vec<f64>,
    pub path: TimeChangedPath,
    pub horizon: f64,
}

pub fn delay_figure(
    v0: f64,
    alpha: f64,
    ds: f64,
    s_max: f64,
    horizon: Option<f64>,
    points: usize,
    seed: u64,
) -> Result<DelayFigure> {
    if !(v0 > 0.0 && v0 < 1.0) {
        return Err(Error::ParameterDomain(format!("v0 must lie in (0, 1), got {v0}")));
    }
    if points < 2 {
        return Err(Error::Domain("at least two plotting points are needed".into()));
    }
    let spec = SymbolSpec::stable(alpha)?;
    let path = match horizon {
        Some(level) => sample_subordinator_to_level(&spec, ds, s_max, level, seed, 40)?,
        None => sample_subordinator(&spec, ds, s_max, seed)?,
    };
    let horizon = horizon.unwrap_or_else(|| path.horizon());
    let dt = horizon / (points - 1) as f64;
    let t_grid: Vec<f64> = (0..points).map(|j| (j as f64 * dt).min(horizon)).collect();
    let tc = time_changed_path(&path, |l| logistic_curve(v0, l), &t_grid)?;
    let s_points = grid_steps(s_max, ds).min(10_000);
    let s_grid: Vec<f64> = (0..=s_points)
        .map(|i| i as f64 * s_max / s_points as f64)
        .collect();
    let v_values = s_grid.iter().map(|&s| logistic_curve(v0, s)).collect();
    Ok(DelayFigure {
        v0,
        alpha,
        s_grid,
        v_values,
        path: tc,
        horizon,
    })
}

/// Streams one path and reports, for each operational step `k` whose time
/// `H(k·ds)` covers new grid points, the half-open range of grid indices
/// `[start, end)` that receive `L = k·ds`. Returns the number of grid points
/// covered before `max_steps` was reached and the last value of `H`.
pub(crate) fn sweep_inverse<R: Rng>(
    sampler: &IncrementSampler,
    rng: &mut R,
    t_grid: &[f64],
    max_steps: usize,
    mut on_run: impl FnMut(usize, usize, usize),
) -> Result<(usize, f64)> {
    let m = t_grid.len();
    let mut j = 0;
    while j < m && t_grid[j] <= 0.0 {
        j += 1;
    }
    if j > 0 {
        on_run(0, j, 0);
    }
    let mut h = 0.0;
    let mut k = 0;
    while j < m {
        if k == max_steps {
            return Ok((j, h));
        }
        k += 1;
        if sampler.is_deterministic() {
            h = k as f64 * sampler.ds;
        } else {
            let inc = sampler.sample(rng);
            if !(inc >= 0.0) || !inc.is_finite() {
                return Err(Error::tolerance(
                    "subordinator increment is negative or non-finite",
                    vec![("increment".into(), inc)],
                ));
            }
            h += inc;
        }
        let start = j;
        while j < m && t_grid[j] <= h {
            j += 1;
        }
        if j > start {
            on_run(start, j, k);
        }
    }
    Ok((m, h))
}

/// `true` for families whose increments can be drawn.
pub fn can_sample(spec: &SymbolSpec) -> bool {
    spec.family() != Family::Custom || spec.custom_sampler().is_some()
}
