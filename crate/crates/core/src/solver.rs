//! Convolution quadrature for `𝔇^Φ u(t) = ∫₀^t u'(s) Π̄(t-s) ds` on a uniform
//! grid, the implicit time march for `𝔇^Φ u = f(u) - σ`, and grid checks of
//! the operator identities.
//!
//! The L1 rule replaces `u` by its piecewise-linear interpolant, so with
//! `W_m = ∫_{m dt}^{(m+1) dt} Π̄` and `b_m = W_m / dt`
//!
//! ```text
//! 𝔇u(t_j) ≈ Σ_{m=1}^{j} (u_m - u_{m-1}) b_{j-m}.
//! ```
//!
//! Solutions of the non-local equations behave like `φ₁(t) = E[L_t]` near
//! `t = 0` (like `t^α` in the stable case), where the piecewise-linear model
//! fails. The marching scheme therefore adds one starting weight per step,
//! `ω_j (u_1 - u_0)`, fixed by requiring the rule to be exact on `φ₁`, for
//! which `𝔇φ₁ = 1`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::special::moment_phi_k;
use crate::symbols::{Family, SymbolSpec, TailKernel};

/// Values on the grid `t_j = j·dt`, `j = 0..len`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    pub dt: f64,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(dt: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Domain(format!("grid step must be positive, got {dt}")));
        }
        if values.is_empty() {
            return Err(Error::Domain("a grid function needs at least u(0)".into()));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("grid value {j} is not finite")));
        }
        Ok(GridFunction { dt, values })
    }

    /// Samples `f` at `t_0..t_n`.
    pub fn from_fn(dt: f64, steps: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(dt, (0..=steps).map(|j| f(j as f64 * dt)).collect())
    }

    pub fn t(&self, j: usize) -> f64 {
        j as f64 * self.dt
    }

    pub fn t_grid(&self) -> Vec<f64> {
        (0..self.values.len()).map(|j| self.t(j)).collect()
    }

    pub fn steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn initial(&self) -> f64 {
        self.values[0]
    }

    pub fn horizon(&self) -> f64 {
        self.t(self.steps())
    }

    /// Linear interpolation; `t` must lie in `[0, horizon]` up to rounding.
    pub fn interpolate(&self, t: f64) -> Result<f64> {
        let n = self.steps();
        let x = t / self.dt;
        if !(x >= -1e-9 && x <= n as f64 + 1e-9) {
            return Err(Error::Domain(format!(
                "t = {t} lies outside the grid [0, {}]",
                self.horizon()
            )));
        }
        let x = x.clamp(0.0, n as f64);
        let i = (x.floor() as usize).min(n.saturating_sub(1));
        if n == 0 {
            return Ok(self.values[0]);
        }
        let w = x - i as f64;
        Ok(self.values[i] * (1.0 - w) + self.values[i + 1] * w)
    }

    /// Trapezoidal `∫₀^T u dt`.
    pub fn integral(&self) -> f64 {
        let v = &self.values;
        if v.len() < 2 {
            return 0.0;
        }
        let inner: f64 = v[1..v.len() - 1].iter().sum();
        self.dt * (inner + 0.5 * (v[0] + v[v.len() - 1]))
    }
}

#[derive(Clone, Debug)]
enum Rule {
    // 𝔇 = d/dt for the identity symbol
    Derivative,
    Kernel { kernel: TailKernel, b: Vec<f64> },
}

/// The discrete operator on a fixed grid, with its weights cached.
#[derive(Clone, Debug)]
pub struct CaputoOperator {
    spec: SymbolSpec,
    dt: f64,
    steps: usize,
    rule: Rule,
}

impl CaputoOperator {
    pub fn new(spec: &SymbolSpec, dt: f64, steps: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Domain(format!("grid step must be positive, got {dt}")));
        }
        let rule = if spec.family() == Family::Identity {
            Rule::Derivative
        } else {
            let kernel = TailKernel::new(spec)?;
            let table = kernel.tabulate(dt, steps.max(1))?;
            Rule::Kernel {
                kernel,
                b: table.cells.iter().map(|w| w / dt).collect(),
            }
        };
        Ok(CaputoOperator {
            spec: spec.clone(),
            dt,
            steps,
            rule,
        })
    }

    pub fn spec(&self) -> &SymbolSpec {
        &self.spec
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// `b_0 = W_0 / dt`, the weight of the newest increment
    /// (`1/dt` for the ordinary derivative).
    pub fn leading_weight(&self) -> f64 {
        match &self.rule {
            Rule::Derivative => 1.0 / self.dt,
            Rule::Kernel { b, .. } => b[0],
        }
    }

    fn check(&self, u: &GridFunction, j: usize) -> Result<()> {
        if (u.dt - self.dt).abs() > 1e-12 * self.dt {
            return Err(Error::Domain(format!(
                "grid step {} does not match the operator's {}",
                u.dt, self.dt
            )));
        }
        if j == 0 || j > self.steps.min(u.steps()) {
            return Err(Error::Domain(format!(
                "index j = {j} outside 1..={}",
                self.steps.min(u.steps())
            )));
        }
        Ok(())
    }

    /// L1 value of `𝔇u(t_j)`.
    pub fn apply(&self, u: &GridFunction, j: usize) -> Result<f64> {
        self.check(u, j)?;
        Ok(self.apply_raw(&u.values, j))
    }

    fn apply_raw(&self, u: &[f64], j: usize) -> f64 {
        match &self.rule {
            Rule::Derivative => (u[j] - u[j - 1]) / self.dt,
            Rule::Kernel { b, .. } => (1..=j).map(|m| (u[m] - u[m - 1]) * b[j - m]).sum(),
        }
    }

    /// `𝔇u(t_j)` for `j = 1..=steps`, entry `j - 1` of the result.
    pub fn apply_all(&self, u: &GridFunction) -> Result<Vec<f64>> {
        let n = self.steps.min(u.steps());
        if n == 0 {
            return Ok(Vec::new());
        }
        self.check(u, n)?;
        Ok((1..=n).map(|j| self.apply_raw(&u.values, j)).collect())
    }

    /// `Π̄(t_j)`.
    pub fn tail_at(&self, j: usize) -> Result<f64> {
        match &self.rule {
            Rule::Derivative => Err(Error::FamilyMismatch(
                "the identity symbol has no Lévy tail".into(),
            )),
            Rule::Kernel { kernel, .. } => kernel.tail(j as f64 * self.dt),
        }
    }

    /// `𝒟u(t_j) = 𝔇u(t_j) + u(0) Π̄(t_j)`.
    pub fn apply_rl(&self, u: &GridFunction, j: usize) -> Result<f64> {
        let caputo = self.apply(u, j)?;
        if u.initial() == 0.0 {
            return Ok(caputo);
        }
        Ok(caputo + u.initial() * self.tail_at(j)?)
    }
}

/// L1 value of the Caputo-type operator at `t_j`.
pub fn apply_caputo_type(spec: &SymbolSpec, u: &GridFunction, j: usize) -> Result<f64> {
    CaputoOperator::new(spec, u.dt, j)?.apply(u, j)
}

/// Riemann–Liouville-type operator `𝒟u(t_j) = 𝔇u(t_j) + u(0) Π̄(t_j)`.
pub fn apply_rl_type(spec: &SymbolSpec, u: &GridFunction, j: usize) -> Result<f64> {
    CaputoOperator::new(spec, u.dt, j)?.apply_rl(u, j)
}

/// The L1 rule with the `φ₁`-exact starting weights.
#[derive(Clone, Debug)]
pub struct CorrectedOperator {
    op: CaputoOperator,
    omega: Vec<f64>,
}

impl CorrectedOperator {
    pub fn new(spec: &SymbolSpec, dt: f64, steps: usize) -> Result<Self> {
        let op = CaputoOperator::new(spec, dt, steps)?;
        let mut omega = vec![0.0; steps + 1];
        if spec.family() != Family::Identity {
            let phi1 = GridFunction::new(
                dt,
                (0..=steps)
                    .map(|j| moment_phi_k(spec, 1, j as f64 * dt))
                    .collect::<Result<Vec<_>>>()?,
            )?;
            let start = phi1.values[1];
            for (j, w) in omega.iter_mut().enumerate().skip(1) {
                *w = (1.0 - op.apply_raw(&phi1.values, j)) / start;
            }
        }
        Ok(CorrectedOperator { op, omega })
    }

    pub fn plain(&self) -> &CaputoOperator {
        &self.op
    }

    pub fn starting_weights(&self) -> &[f64] {
        &self.omega
    }

    pub fn apply(&self, u: &GridFunction, j: usize) -> Result<f64> {
        let base = self.op.apply(u, j)?;
        Ok(base + self.omega[j] * (u.values[1] - u.values[0]))
    }

    pub fn apply_all(&self, u: &GridFunction) -> Result<Vec<f64>> {
        let base = self.op.apply_all(u)?;
        let start = if u.values.len() > 1 { u.values[1] - u.values[0] } else { 0.0 };
        Ok(base
            .into_iter()
            .enumerate()
            .map(|(i, d)| d + self.omega[i + 1] * start)
            .collect())
    }
}

type ScalarFn = dyn Fn(f64) -> f64 + Send + Sync;

/// Right-hand side `f` of `𝔇u = f(u) - σ`.
#[derive(Clone)]
pub enum Rhs {
    /// `z(1 - z)`
    Logistic,
    /// `-a z`
    Linear { a: f64 },
    Custom {
        name: String,
        f: Arc<ScalarFn>,
        lipschitz: f64,
    },
}

impl std::fmt::Debug for Rhs {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.describe())
    }
}

impl Rhs {
    pub fn eval(&self, z: f64) -> f64 {
        match self {
            Rhs::Logistic => z * (1.0 - z),
            Rhs::Linear { a } => -a * z,
            Rhs::Custom { f, .. } => f(z),
        }
    }

    /// Lipschitz constant on the range the solution visits (`[0, 1]` for the logistic case).
    pub fn lipschitz(&self) -> f64 {
        match self {
            Rhs::Logistic => 1.0,
            Rhs::Linear { a } => a.abs(),
            Rhs::Custom { lipschitz, .. } => *lipschitz,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Rhs::Logistic => "rhs=logistic".into(),
            Rhs::Linear { a } => format!("rhs=linear;a={a}"),
            Rhs::Custom { name, .. } => format!("rhs={name}"),
        }
    }
}

/// `𝔇^Φ u + σ = f(u)` on `[0, T]` with `u(0) = u₀`.
#[derive(Clone, Debug)]
pub struct NonlocalProblem {
    pub spec: SymbolSpec,
    pub rhs: Rhs,
    pub sigma: Option<GridFunction>,
    pub u0: f64,
    pub horizon: f64,
    pub dt: f64,
}

impl NonlocalProblem {
    pub fn new(spec: SymbolSpec, rhs: Rhs, u0: f64, horizon: f64, dt: f64) -> Result<Self> {
        if matches!(rhs, Rhs::Logistic) && !(u0 > 0.0 && u0 < 1.0) {
            return Err(Error::ParameterDomain(format!(
                "the logistic problem needs u0 in (0, 1), got {u0}"
            )));
        }
        if !u0.is_finite() {
            return Err(Error::ParameterDomain(format!("u0 must be finite, got {u0}")));
        }
        if !(horizon > 0.0) || !(dt > 0.0) || dt > horizon {
            return Err(Error::Domain(format!(
                "need 0 < dt ≤ T, got dt = {dt}, T = {horizon}"
            )));
        }
        Ok(NonlocalProblem {
            spec,
            rhs,
            sigma: None,
            u0,
            horizon,
            dt,
        })
    }

    pub fn with_sigma(mut self, sigma: GridFunction) -> Self {
        self.sigma = Some(sigma);
        self
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round().max(1.0) as usize
    }

    fn sigma_at(&self, t: f64) -> Result<f64> {
        match &self.sigma {
            None => Ok(0.0),
            Some(s) => s.interpolate(t),
        }
    }
}

const FIXED_POINT_ITERS: usize = 200;

/// Solves `c (x - prev) + hist = f(x) - s` for `x`, where `c` exceeds the
/// Lipschitz constant of `f`: fixed-point iteration, then bisection.
fn implicit_step(rhs: &Rhs, c: f64, prev: f64, hist: f64, s: f64, j: usize) -> Result<f64> {
    let g = |x: f64| c * (x - prev) + hist - rhs.eval(x) + s;
    let mut x = prev;
    for _ in 0..FIXED_POINT_ITERS {
        let next = prev + (rhs.eval(x) - s - hist) / c;
        if !next.is_finite() {
            break;
        }
        if (next - x).abs() <= 4.0 * f64::EPSILON * next.abs().max(1.0) {
            return Ok(next);
        }
        x = next;
    }
    // g is strictly increasing because c > Lip(f)
    let (mut lo, mut hi) = (prev - 1.0, prev + 1.0);
    let mut widen = 0;
    while g(lo) > 0.0 || g(hi) < 0.0 {
        lo -= (hi - lo).abs();
        hi += (hi - lo).abs();
        widen += 1;
        if widen > 60 || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Iteration {
                message: "implicit step could not bracket the root".into(),
                diagnostics: vec![("step".into(), j as f64), ("previous".into(), prev)],
            });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * mid.abs().max(1.0) {
            return Ok(0.5 * (lo + hi));
        }
    }
    Err(Error::Iteration {
        message: "implicit step bisection did not converge".into(),
        diagnostics: vec![("step".into(), j as f64), ("bracket".into(), hi - lo)],
    })
}

/// Marches `problem` over its grid.
pub fn solve_ivp(problem: &NonlocalProblem) -> Result<GridFunction> {
    let n = problem.steps();
    let dt = problem.dt;
    let rhs = &problem.rhs;
    let lip = rhs.lipschitz();
    let mut u = Vec::with_capacity(n + 1);
    u.push(problem.u0);

    if problem.spec.family() == Family::Identity {
        // trapezoidal rule for u' = f(u) - σ
        if !(dt * lip / 2.0 < 1.0) {
            return Err(Error::StepSize(format!(
                "dt·Lip(f)/2 = {} ≥ 1; reduce dt",
                dt * lip / 2.0
            )));
        }
        let mut s_prev = problem.sigma_at(0.0)?;
        for j in 1..=n {
            let s = problem.sigma_at(j as f64 * dt)?;
            let prev = u[j - 1];
            // (x - prev)/dt = (f(x) - s + f(prev) - s_prev)/2, scaled by 2
            let hist = -(rhs.eval(prev) - s_prev);
            let x = implicit_step(rhs, 2.0 / dt, prev, hist, s, j)?;
            u.push(x);
            s_prev = s;
        }
        return GridFunction::new(dt, u);
    }

    let op = CorrectedOperator::new(&problem.spec, dt, n)?;
    let b = match &op.op.rule {
        Rule::Kernel { b, .. } => b.clone(),
        Rule::Derivative => unreachable!(),
    };
    let omega = op.starting_weights();
    let c0 = b[0];
    let c1 = b[0] + omega[1];
    if !(lip < c0.min(c1)) {
        return Err(Error::StepSize(format!(
            "implicit step is not a contraction: Lip(f)/b_0 = {} ≥ 1; reduce dt",
            lip / c0.min(c1)
        )));
    }
    for j in 1..=n {
        let s = problem.sigma_at(j as f64 * dt)?;
        let (c, hist) = if j == 1 {
            (c1, 0.0)
        } else {
            let mut h = omega[j] * (u[1] - u[0]);
            for m in 1..j {
                h += (u[m] - u[m - 1]) * b[j - m];
            }
            (c0, h)
        };
        let x = implicit_step(rhs, c, u[j - 1], hist, s, j)?;
        u.push(x);
    }
    GridFunction::new(dt, u)
}

/// `𝔇û(t_j) + σ̂(t_j) - û(t_j)(1 - û(t_j))` for `j = 1..=n`.
pub fn logistic_residual(
    op: &CorrectedOperator,
    u_hat: &GridFunction,
    sigma_hat: &GridFunction,
) -> Result<Vec<f64>> {
    if u_hat.values.len() != sigma_hat.values.len() {
        return Err(Error::Domain("û and σ̂ must share a grid".into()));
    }
    let d = op.apply_all(u_hat)?;
    Ok(d
        .iter()
        .enumerate()
        .map(|(i, dj)| {
            let u = u_hat.values[i + 1];
            dj + sigma_hat.values[i + 1] - u * (1.0 - u)
        })
        .collect())
}

/// One refinement level of the convolved right-hand-side identity.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualLevel {
    pub dt: f64,
    pub max_residual: f64,
}

/// Both sides of `𝔇v = f(v) * Π̄` for `v = c e^{-at}`, `f(v) = -a v`.
#[derive(Clone, Debug)]
pub struct ConvolvedReport {
    pub levels: Vec<ResidualLevel>,
    /// Empirical order between the two finest levels.
    pub rate: f64,
    /// `(t, lhs, rhs)` on the finest grid.
    pub finest: Vec<(f64, f64, f64)>,
}

impl ConvolvedReport {
    pub fn monotone(&self) -> bool {
        self.levels
            .windows(2)
            .all(|w| w[1].max_residual <= w[0].max_residual)
    }
}

fn convolved_sides(spec: &SymbolSpec, a: f64, c: f64, horizon: f64, dt: f64) -> Result<Vec<(f64, f64, f64)>> {
    let n = (horizon / dt).round() as usize;
    let op = CaputoOperator::new(spec, dt, n)?;
    let w: Vec<f64> = match &op.rule {
        Rule::Kernel { b, .. } => b.iter().map(|x| x * dt).collect(),
        Rule::Derivative => {
            return Err(Error::FamilyMismatch(
                "the convolved identity needs a Lévy tail; the identity symbol has none".into(),
            ))
        }
    };
    let v = GridFunction::from_fn(dt, n, |t| c * (-a * t).exp())?;
    let fv: Vec<f64> = v.values.iter().map(|x| -a * x).collect();
    let lhs = op.apply_all(&v)?;
    Ok((1..=n)
        .map(|j| {
            // product trapezoid: f(v(t_j - z)) linear on each kernel cell
            let rhs: f64 = (0..j).map(|m| w[m] * 0.5 * (fv[j - m] + fv[j - m - 1])).sum();
            (j as f64 * dt, lhs[j - 1], rhs)
        })
        .collect())
}

/// Residual of the convolved identity at `dt`, `dt/2` and `dt/4`.
pub fn verify_convolved_rhs(
    spec: &SymbolSpec,
    a: f64,
    c: f64,
    horizon: f64,
    dt: f64,
) -> Result<ConvolvedReport> {
    if !(a >= 0.0) || !(c > 0.0) {
        return Err(Error::ParameterDomain(format!(
            "need decay a ≥ 0 and scale c > 0, got a = {a}, c = {c}"
        )));
    }
    let mut levels = Vec::new();
    let mut finest = Vec::new();
    for level in 0..3 {
        let h = dt / f64::powi(2.0, level);
        let sides = convolved_sides(spec, a, c, horizon, h)?;
        let max_residual = sides
            .iter()
            .map(|(_, l, r)| (l - r).abs())
            .fold(0.0, f64::max);
        levels.push(ResidualLevel { dt: h, max_residual });
        finest = sides;
    }
    let (coarse, fine) = (levels[1].max_residual, levels[2].max_residual);
    let rate = if fine > 0.0 && coarse > 0.0 {
        (coarse / fine).log2()
    } else {
        f64::INFINITY
    };
    Ok(ConvolvedReport {
        levels,
        rate,
        finest,
    })
}

/// Error of the plain scheme on `𝔇φ_k = φ_{k-1}` at fixed times.
#[derive(Clone, Debug, PartialEq)]
pub struct LadderLevel {
    pub dt: f64,
    pub k: u32,
    pub max_error: f64,
}

/// Applies the plain scheme to `φ_k` on `[0, T]` at `dt`, `dt/2`, `dt/4` and
/// compares with `φ_{k-1}` at `eval_times`, which must be multiples of `dt`.
pub fn verify_ladder(
    spec: &SymbolSpec,
    k_max: u32,
    horizon: f64,
    dt: f64,
    eval_times: &[f64],
) -> Result<Vec<LadderLevel>> {
    if k_max < 1 {
        return Err(Error::Domain("the ladder check needs k_max ≥ 1".into()));
    }
    if eval_times.iter().any(|&t| !(t > 0.0 && t <= horizon)) {
        return Err(Error::Domain("evaluation times must lie in (0, T]".into()));
    }
    let mut out = Vec::new();
    for level in 0..3 {
        let h = dt / f64::powi(2.0, level);
        let n = (horizon / h).round() as usize;
        let op = CaputoOperator::new(spec, h, n)?;
        for k in 1..=k_max {
            let phi = GridFunction::from_fn(h, n, |t| moment_phi_k(spec, k, t).unwrap_or(f64::NAN))?;
            let mut max_error = 0.0f64;
            for &t in eval_times {
                let j = (t / h).round() as usize;
                let d = op.apply(&phi, j)?;
                max_error = max_error.max((d - moment_phi_k(spec, k - 1, j as f64 * h)?).abs());
            }
            out.push(LadderLevel { dt: h, k, max_error });
        }
    }
    Ok(out)
}

/// Discrete `‖𝔇v‖_{L¹}` against `‖Π̄‖_{L¹}·‖v'‖_{L¹}` (Young's inequality), with
/// `‖Π̄‖_{L¹(0,∞)} = lim Φ(λ)/λ`.
pub fn young_bound(spec: &SymbolSpec, v: &GridFunction) -> Result<(f64, f64)> {
    let op = CaputoOperator::new(spec, v.dt, v.steps())?;
    let d = op.apply_all(v)?;
    let lhs = d.iter().map(|x| x.abs()).sum::<f64>() * v.dt;
    let dv: f64 = v.values.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    Ok((lhs, spec.phi_over_lambda_limit() * dv))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GrowthClass {
    Delayed,
    Neutral,
    Rushed,
    Divergent,
}

impl GrowthClass {
    pub fn as_str(self) -> &'static str {
        match self {
            GrowthClass::Delayed => "delayed",
            GrowthClass::Neutral => "neutral",
            GrowthClass::Rushed => "rushed",
            GrowthClass::Divergent => "integral diverges",
        }
    }
}

/// `∫₀^∞ u dt` against `(lim Φ(λ)/λ)·∫₀^T v dt`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DelayReport {
    pub lhs: f64,
    pub rhs: f64,
    pub v_integral: f64,
    pub limit: f64,
    pub ratio: f64,
    pub classification: GrowthClass,
}

/// Relative band around 1 classified as neutral.
pub const NEUTRAL_BAND: f64 = 1e-3;

pub fn delayed_rushed_ratio(spec: &SymbolSpec, v: &GridFunction, mc_u: &GridFunction) -> DelayReport {
    delay_report(spec, v.integral(), mc_u.integral())
}

/// Classification from `∫₀^T v` and an already computed `∫₀^∞ u`.
pub fn delay_report(spec: &SymbolSpec, v_integral: f64, lhs: f64) -> DelayReport {
    let limit = spec.phi_over_lambda_limit();
    let rhs = limit * v_integral;
    let ratio = lhs / v_integral;
    let classification = if !limit.is_finite() {
        GrowthClass::Divergent
    } else if (ratio - 1.0).abs() <= NEUTRAL_BAND {
        GrowthClass::Neutral
    } else if ratio > 1.0 {
        GrowthClass::Delayed
    } else {
        GrowthClass::Rushed
    };
    DelayReport {
        lhs,
        rhs,
        v_integral,
        limit,
        ratio,
        classification,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::growth::logistic_curve;
    use crate::special::functions::gamma;
    use crate::special::mittag_leffler;

    fn stable(alpha: f64) -> SymbolSpec {
        SymbolSpec::stable(alpha).unwrap()
    }

    #[test]
    fn constants_are_annihilated() {
        let u = GridFunction::from_fn(0.01, 100, |_| 3.0).unwrap();
        for spec in [stable(0.5), SymbolSpec::gamma(1.0, 1.0).unwrap()] {
            let op = CaputoOperator::new(&spec, 0.01, 100).unwrap();
            assert!(op.apply_all(&u).unwrap().iter().all(|&d| d == 0.0));
            for j in [1, 50, 100] {
                let rl = op.apply_rl(&u, j).unwrap();
                assert!((rl - 3.0 * op.tail_at(j).unwrap()).abs() < 1e-14 * rl);
            }
        }
    }

    #[test]
    fn linear_function_derivative() {
        // 𝔇t = ∫₀^t Π̄ = t^{1-α}/Γ(2-α); exact for piecewise-linear u
        let u = GridFunction::from_fn(0.01, 100, |t| t).unwrap();
        let got = apply_caputo_type(&stable(0.5), &u, 100).unwrap();
        assert!((got - 1.0 / gamma(1.5)).abs() < 1e-12);
        let rl = apply_rl_type(&stable(0.5), &u, 100).unwrap();
        assert_eq!(rl, got);
        // u = 1 + t at t = 1: Π̄(1) + 1/Γ(1.5)
        let w = GridFunction::from_fn(0.01, 100, |t| 1.0 + t).unwrap();
        let rl = apply_rl_type(&stable(0.5), &w, 100).unwrap();
        let tail = 1.0 / std::f64::consts::PI.sqrt();
        assert!((rl - (tail + 1.0 / gamma(1.5))).abs() < 1e-12);
    }

    #[test]
    fn operator_is_linear() {
        let spec = SymbolSpec::gamma(1.0, 2.0).unwrap();
        let op = CaputoOperator::new(&spec, 0.02, 50).unwrap();
        let u = GridFunction::from_fn(0.02, 50, |t| t.sin()).unwrap();
        let w = GridFunction::from_fn(0.02, 50, |t| (t * t).exp()).unwrap();
        let comb = GridFunction::new(
            0.02,
            u.values.iter().zip(&w.values).map(|(a, b)| 2.0 * a - 3.0 * b).collect(),
        )
        .unwrap();
        let du = op.apply_all(&u).unwrap();
        let dw = op.apply_all(&w).unwrap();
        let dc = op.apply_all(&comb).unwrap();
        for i in 0..50 {
            let expected = 2.0 * du[i] - 3.0 * dw[i];
            assert!((dc[i] - expected).abs() <= 1e-12 * expected.abs().max(1.0));
        }
    }

    #[test]
    fn identity_operator_is_backward_difference() {
        let u = GridFunction::from_fn(0.1, 10, |t| t * t).unwrap();
        let d = apply_caputo_type(&SymbolSpec::identity(), &u, 10).unwrap();
        assert!((d - (1.0 - 0.81) / 0.1).abs() < 1e-12);
    }

    #[test]
    fn identity_logistic_matches_closed_form() {
        let p = NonlocalProblem::new(SymbolSpec::identity(), Rhs::Logistic, 0.1, 10.0, 1e-3).unwrap();
        let u = solve_ivp(&p).unwrap();
        let err = u
            .values
            .iter()
            .enumerate()
            .map(|(j, x)| (x - logistic_curve(0.1, u.t(j))).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn identity_agrees_with_explicit_rk4() {
        for rhs in [Rhs::Logistic, Rhs::Linear { a: 1.5 }] {
            let p = NonlocalProblem::new(SymbolSpec::identity(), rhs.clone(), 0.3, 2.0, 1e-3).unwrap();
            let u = solve_ivp(&p).unwrap();
            let h = 1e-4;
            let mut y = 0.3f64;
            for _ in 0..20_000 {
                let k1 = rhs.eval(y);
                let k2 = rhs.eval(y + 0.5 * h * k1);
                let k3 = rhs.eval(y + 0.5 * h * k2);
                let k4 = rhs.eval(y + h * k3);
                y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
            assert!((u.values.last().unwrap() - y).abs() < 1e-6, "{rhs:?}");
        }
    }

    #[test]
    fn starting_correction_is_exact_on_phi1() {
        let spec = stable(0.5);
        let op = CorrectedOperator::new(&spec, 0.01, 100).unwrap();
        let phi1 = GridFunction::from_fn(0.01, 100, |t| moment_phi_k(&spec, 1, t).unwrap()).unwrap();
        for d in op.apply_all(&phi1).unwrap() {
            assert!((d - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mittag_leffler_relaxation() {
        let spec = stable(0.5);
        let mut errors = Vec::new();
        for dt in [0.02, 0.01, 0.005] {
            let p = NonlocalProblem::new(spec.clone(), Rhs::Linear { a: 1.0 }, 1.0, 1.0, dt).unwrap();
            let u = solve_ivp(&p).unwrap();
            let err = (1..u.values.len())
                .map(|j| (u.values[j] - mittag_leffler(0.5, -u.t(j).sqrt()).unwrap()).abs())
                .fold(0.0, f64::max);
            errors.push(err);
        }
        let order = (errors[1] / errors[2]).log2();
        assert!(errors[2] < errors[1] && errors[1] < errors[0], "{errors:?}");
        assert!(order > 0.9, "order {order}, {errors:?}");
    }

    #[test]
    fn contraction_violation_is_reported() {
        let p = NonlocalProblem::new(stable(0.5), Rhs::Linear { a: 100.0 }, 1.0, 1.0, 0.5).unwrap();
        assert!(matches!(solve_ivp(&p), Err(Error::StepSize(_))));
    }

    #[test]
    fn convolved_identity_converges() {
        for spec in [stable(0.5), SymbolSpec::gamma(1.0, 1.0).unwrap()] {
            let report = verify_convolved_rhs(&spec, 1.0, 1.0, 2.0, 0.02).unwrap();
            assert!(report.monotone(), "{:?}", report.levels);
            assert!(report.levels[2].max_residual < report.levels[0].max_residual);
        }
        let flat = verify_convolved_rhs(&stable(0.5), 0.0, 1.0, 1.0, 0.05).unwrap();
        assert!(flat.levels.iter().all(|l| l.max_residual == 0.0));
    }

    #[test]
    fn young_inequality_holds() {
        let spec = SymbolSpec::gamma(1.0, 2.0).unwrap();
        let v = GridFunction::from_fn(0.01, 1000, |t| (-t).exp()).unwrap();
        let (lhs, rhs) = young_bound(&spec, &v).unwrap();
        assert!(lhs <= rhs * (1.0 + 1e-9), "{lhs} vs {rhs}");
    }

    #[test]
    fn delay_report() {
        let v = GridFunction::from_fn(0.01, 1000, |t| logistic_curve(0.1, t)).unwrap();
        let id = delayed_rushed_ratio(&SymbolSpec::identity(), &v, &v);
        assert_eq!(id.ratio, 1.0);
        assert_eq!(id.classification, GrowthClass::Neutral);
        assert_eq!(
            delayed_rushed_ratio(&SymbolSpec::stable(0.5).unwrap(), &v, &v).classification,
            GrowthClass::Divergent
        );
        assert!(delayed_rushed_ratio(&SymbolSpec::stable(0.5).unwrap(), &v, &v).rhs.is_infinite());
    }
}
