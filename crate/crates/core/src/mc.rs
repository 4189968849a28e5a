//! Monte Carlo estimators of `E₀[v(L_t)]`, `Var[v(L_t)]` and the restricted
//! expectation `E₀[v(L_t); t < H_r]`, plus the collocation search for series
//! coefficients of the non-local logistic equation.
//!
//! Paths are split into a fixed number of batches. Each path draws from its
//! own ChaCha stream `path_rng(seed, index)` and each batch is reduced in
//! index order, so results do not depend on the size of the worker pool.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::dd::{gamma_dd, Dd};
use crate::error::{Error, Result};
use crate::growth::logistic_curve;
use crate::paths::{grid_steps, path_rng, sweep_inverse, IncrementSampler};
use crate::series::{CoefficientKind, SeriesCoefficients};
use crate::solver::{CorrectedOperator, GridFunction};
use crate::special::{moment_phi_k, moment_phi_k_with, InversionMethod};
use crate::symbols::{Family, SymbolSpec};

/// Simulation parameters shared by the estimators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McConfig {
    /// Operational-time step of the simulated subordinator.
    pub ds: f64,
    /// Initial operational horizon.
    pub s_max: f64,
    /// How many times the horizon may double before giving up.
    pub max_doublings: u32,
    pub batches: usize,
    /// Place the first passage at the middle of the crossing step rather
    /// than at its end.
    pub midpoint: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            ds: 1e-3,
            s_max: 16.0,
            max_doublings: 20,
            batches: 64,
            midpoint: true,
        }
    }
}

impl McConfig {
    fn validate(&self) -> Result<()> {
        if !(self.ds > 0.0 && self.ds.is_finite()) {
            return Err(Error::ParameterDomain(format!("ds must be positive, got {}", self.ds)));
        }
        if !(self.s_max > 0.0) {
            return Err(Error::ParameterDomain(format!("s_max must be positive, got {}", self.s_max)));
        }
        if self.batches == 0 {
            return Err(Error::ParameterDomain("need at least one batch".into()));
        }
        Ok(())
    }

    fn horizon_cap(&self) -> f64 {
        self.s_max * f64::powi(2.0, self.max_doublings as i32)
    }

    fn level(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else if self.midpoint {
            (k as f64 - 0.5) * self.ds
        } else {
            k as f64 * self.ds
        }
    }
}

/// Sample mean of `n` replications.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub sample_variance: f64,
    pub stderr: f64,
    pub n: usize,
    pub seed: u64,
}

impl Estimate {
    fn from_welford(w: &Welford, seed: u64) -> Self {
        let var = w.variance();
        Estimate {
            mean: w.mean,
            sample_variance: var,
            stderr: (var / w.count as f64).sqrt(),
            n: w.count,
            seed,
        }
    }

    /// `|mean - target| ≤ k·stderr`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr
    }

    /// `(mean - target) / stderr`.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.mean - target) / self.stderr
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Welford {
    count: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(&mut self, other: &Welford) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / n;
        self.m2 += other.m2 + delta * delta * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }
}

type Functional<'a> = &'a (dyn Fn(f64) -> f64 + Sync);

/// Per-batch accumulators, indexed `[functional][grid point]`.
struct BatchStats {
    stats: Vec<Vec<Welford>>,
}

fn batch_ranges(n: usize, batches: usize) -> Vec<(usize, usize)> {
    let b = batches.min(n).max(1);
    (0..b).map(|i| (i * n / b, (i + 1) * n / b)).collect()
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::Domain("empty time grid".into()));
    }
    if t_grid.iter().any(|&t| !(t >= 0.0) || !t.is_finite()) {
        return Err(Error::Domain("time grid entries must be finite and ≥ 0".into()));
    }
    if t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Domain("time grid must be nondecreasing".into()));
    }
    Ok(())
}

/// Streams `n` paths once and evaluates every functional at `L_t` for every
/// grid time (common random numbers). With `restrict = Some(r)` the path is
/// cut at operational time `r` and uncovered points contribute 0.
fn crn_sweep(
    spec: &SymbolSpec,
    fs: &[Functional],
    t_grid: &[f64],
    n: usize,
    seed: u64,
    cfg: &McConfig,
    restrict: Option<f64>,
) -> Result<Vec<BatchStats>> {
    cfg.validate()?;
    check_grid(t_grid)?;
    if n < 2 {
        return Err(Error::ParameterDomain(format!("need n ≥ 2 replications, got {n}")));
    }
    let sampler = IncrementSampler::new(spec, cfg.ds)?;
    let m = t_grid.len();
    let cap = cfg.horizon_cap();
    let max_steps = match restrict {
        Some(r) => (r / cfg.ds).floor() as usize,
        None => grid_steps(cap, cfg.ds),
    };

    let run_batch = |(lo, hi): (usize, usize)| -> Result<BatchStats> {
        let mut stats = vec![vec![Welford::default(); m]; fs.len()];
        let mut levels = vec![0.0; m];
        let mut covered_mask = vec![false; m];
        for index in lo..hi {
            if sampler.is_deterministic() {
                // H(s) = s, so L_t = t
                for (j, &t) in t_grid.iter().enumerate() {
                    levels[j] = t;
                    covered_mask[j] = restrict.is_none_or(|r| t < r);
                }
            } else {
                let mut rng = path_rng(seed, index as u64);
                covered_mask.iter_mut().for_each(|c| *c = false);
                let (covered, reached) =
                    sweep_inverse(&sampler, &mut rng, t_grid, max_steps, |start, end, k| {
                        let level = cfg.level(k);
                        for j in start..end {
                            levels[j] = level;
                            covered_mask[j] = true;
                        }
                    })?;
                if covered < m && restrict.is_none() {
                    return Err(Error::HorizonExceeded {
                        level: t_grid[covered],
                        s_max: cap,
                        reached,
                        suggested: 2.0 * cap,
                    });
                }
            }
            for (f, row) in fs.iter().zip(stats.iter_mut()) {
                for j in 0..m {
                    row[j].push(if covered_mask[j] { f(levels[j]) } else { 0.0 });
                }
            }
        }
        Ok(BatchStats { stats })
    };

    batch_ranges(n, cfg.batches)
        .into_par_iter()
        .map(run_batch)
        .collect::<Result<Vec<_>>>()
}

fn pooled(batches: &[BatchStats], f: usize, j: usize) -> Welford {
    let mut w = Welford::default();
    for b in batches {
        w.merge(&b.stats[f][j]);
    }
    w
}

/// `E₀[v(L_t)]` from `n` independent inverse paths.
pub fn estimate_functional(
    spec: &SymbolSpec,
    v: &(dyn Fn(f64) -> f64 + Sync),
    t: f64,
    n: usize,
    seed: u64,
    cfg: &McConfig,
) -> Result<Estimate> {
    Ok(estimate_on_grid(spec, v, &[t], n, seed, cfg)?[0])
}

/// `E₀[v(L_t)]` for every `t` in the grid, one path population for all.
pub fn estimate_on_grid(
    spec: &SymbolSpec,
    v: &(dyn Fn(f64) -> f64 + Sync),
    t_grid: &[f64],
    n: usize,
    seed: u64,
    cfg: &McConfig,
) -> Result<Vec<Estimate>> {
    let batches = crn_sweep(spec, &[v], t_grid, n, seed, cfg, None)?;
    Ok((0..t_grid.len())
        .map(|j| Estimate::from_welford(&pooled(&batches, 0, j), seed))
        .collect())
}

/// Several functionals evaluated on the same paths.
pub fn estimate_many(
    spec: &SymbolSpec,
    fs: &[Functional],
    t_grid: &[f64],
    n: usize,
    seed: u64,
    cfg: &McConfig,
) -> Result<Vec<Vec<Estimate>>> {
    let batches = crn_sweep(spec, fs, t_grid, n, seed, cfg, None)?;
    Ok((0..fs.len())
        .map(|f| {
            (0..t_grid.len())
                .map(|j| Estimate::from_welford(&pooled(&batches, f, j), seed))
                .collect()
        })
        .collect())
}

/// `û(t)` and `σ̂(t) = Var[v(L_t)]` on a grid from common random numbers.
#[derive(Clone, Debug)]
pub struct SigmaTable {
    pub t_grid: Vec<f64>,
    pub u_hat: Vec<f64>,
    pub sigma_hat: Vec<f64>,
    pub stderr_u: Vec<f64>,
    pub stderr_sigma: Vec<f64>,
    /// Batch means of `v(L_t)`, `[batch][j]`.
    pub batch_u: Vec<Vec<f64>>,
    /// Batch means of `v(L_t)²`.
    pub batch_second: Vec<Vec<f64>>,
    pub n: usize,
    pub seed: u64,
}

impl SigmaTable {
    fn uniform_step(&self) -> Result<f64> {
        let m = self.t_grid.len();
        if m < 2 || self.t_grid[0] != 0.0 {
            return Err(Error::Domain("grid functions need a grid starting at t = 0".into()));
        }
        let dt = self.t_grid[m - 1] / (m - 1) as f64;
        let uniform = self
            .t_grid
            .iter()
            .enumerate()
            .all(|(j, t)| (t - j as f64 * dt).abs() <= 1e-9 * dt.max(1.0));
        if !uniform {
            return Err(Error::Domain("the time grid is not uniform".into()));
        }
        Ok(dt)
    }

    pub fn u_grid(&self) -> Result<GridFunction> {
        GridFunction::new(self.uniform_step()?, self.u_hat.clone())
    }

    pub fn sigma_grid(&self) -> Result<GridFunction> {
        GridFunction::new(self.uniform_step()?, self.sigma_hat.clone())
    }
}

pub fn estimate_variance_sigma(
    spec: &SymbolSpec,
    v: &(dyn Fn(f64) -> f64 + Sync),
    t_grid: &[f64],
    n: usize,
    seed: u64,
    cfg: &McConfig,
) -> Result<SigmaTable> {
    let square = |x: f64| {
        let y = v(x);
        y * y
    };
    let batches = crn_sweep(spec, &[v, &square], t_grid, n, seed, cfg, None)?;
    let m = t_grid.len();
    let b = batches.len() as f64;
    let mut table = SigmaTable {
        t_grid: t_grid.to_vec(),
        u_hat: Vec::with_capacity(m),
        sigma_hat: Vec::with_capacity(m),
        stderr_u: Vec::with_capacity(m),
        stderr_sigma: Vec::with_capacity(m),
        batch_u: batches
            .iter()
            .map(|s| s.stats[0].iter().map(|w| w.mean).collect())
            .collect(),
        batch_second: batches
            .iter()
            .map(|s| s.stats[1].iter().map(|w| w.mean).collect())
            .collect(),
        n,
        seed,
    };
    for j in 0..m {
        let w = pooled(&batches, 0, j);
        let est = Estimate::from_welford(&w, seed);
        table.u_hat.push(est.mean);
        table.sigma_hat.push(est.sample_variance);
        table.stderr_u.push(est.stderr);
        let mut spread = Welford::default();
        for s in &batches {
            spread.push(s.stats[0][j].variance());
        }
        table.stderr_sigma.push(if b > 1.0 { (spread.variance() / b).sqrt() } else { 0.0 });
    }
    Ok(table)
}

/// `E₀[v(L_t) 1{t < H_r}]`, with `L_t` and `H_r` read off the same path.
pub fn estimate_restricted(
    spec: &SymbolSpec,
    v: &(dyn Fn(f64) -> f64 + Sync),
    t: f64,
    r: f64,
    n: usize,
    seed: u64,
    cfg: &McConfig,
) -> Result<Estimate> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::ParameterDomain(format!("restriction level r must be positive, got {r}")));
    }
    let batches = crn_sweep(spec, &[v], &[t], n, seed, cfg, Some(r))?;
    Ok(Estimate::from_welford(&pooled(&batches, 0, 0), seed))
}

/// `∫₀^∞ E₀[v(L_t); L_t < T] dt = E[∫₀^T v(s) dH_s]`, estimated pathwise with
/// `v` at the midpoint of each operational step.
pub fn estimate_integrated(
    spec: &SymbolSpec,
    v: &(dyn Fn(f64) -> f64 + Sync),
    level: f64,
    n: usize,
    seed: u64,
    cfg: &McConfig,
) -> Result<Estimate> {
    cfg.validate()?;
    if !(level > 0.0) || !level.is_finite() {
        return Err(Error::ParameterDomain(format!("level must be positive, got {level}")));
    }
    if n < 2 {
        return Err(Error::ParameterDomain(format!("need n ≥ 2 replications, got {n}")));
    }
    let sampler = IncrementSampler::new(spec, cfg.ds)?;
    let steps = grid_steps(level, cfg.ds);
    let ds = level / steps as f64;
    let sampler = if (ds - cfg.ds).abs() > 0.0 { IncrementSampler::new(spec, ds)? } else { sampler };
    let weights: Vec<f64> = (0..steps).map(|k| v((k as f64 + 0.5) * ds)).collect();
    let batches: Vec<Welford> = batch_ranges(n, cfg.batches)
        .into_par_iter()
        .map(|(lo, hi)| {
            let mut w = Welford::default();
            for index in lo..hi {
                let y = if sampler.is_deterministic() {
                    weights.iter().sum::<f64>() * ds
                } else {
                    let mut rng = path_rng(seed, index as u64);
                    weights.iter().map(|wk| wk * sampler.sample(&mut rng)).sum()
                };
                w.push(y);
            }
            w
        })
        .collect();
    let mut total = Welford::default();
    for b in &batches {
        total.merge(b);
    }
    Ok(Estimate::from_welford(&total, seed))
}

/// Residual of `𝔇^Φû + σ̂ - û(1 - û)` for Monte Carlo `(û, σ̂)`.
#[derive(Clone, Debug)]
pub struct ClosureReport {
    pub t_grid: Vec<f64>,
    pub residual: Vec<f64>,
    /// Batch standard error of the residual at each grid time.
    pub stderr: Vec<f64>,
    pub max_residual: f64,
    pub combined_stderr: f64,
    /// `max |R_dt - R_2dt|` at shared grid times.
    pub discretization: f64,
    pub threshold: f64,
}

impl ClosureReport {
    pub fn passed(&self) -> bool {
        self.max_residual <= self.threshold
    }
}

/// `(û, σ̂)` for logistic `v` with `v(0) = u₀` on `[0, T]`, pushed through the
/// discrete residual.
pub fn theorem41_closure(
    spec: &SymbolSpec,
    u0: f64,
    n: usize,
    dt: f64,
    horizon: f64,
    seed: u64,
    cfg: &McConfig,
) -> Result<ClosureReport> {
    if !(u0 > 0.0 && u0 < 1.0) {
        return Err(Error::ParameterDomain(format!("u0 must lie in (0, 1), got {u0}")));
    }
    if spec.family() == Family::Identity {
        return Err(Error::FamilyMismatch(
            "the identity symbol has Var[v(L_t)] = 0; nothing to close".into(),
        ));
    }
    let steps = (horizon / dt).round() as usize;
    if steps < 2 {
        return Err(Error::Domain("need at least two grid steps".into()));
    }
    let dt = horizon / steps as f64;
    let t_grid: Vec<f64> = (0..=steps).map(|j| j as f64 * dt).collect();
    let v = move |x: f64| logistic_curve(u0, x);
    let table = estimate_variance_sigma(spec, &v, &t_grid, n, seed, cfg)?;

    let op = CorrectedOperator::new(spec, dt, steps)?;
    let residual = residual_on(&op, &table.u_hat, &table.sigma_hat, dt)?;

    // R is linear in (û, E[v²]): R = 𝔇û + E[v²] - û up to the n/(n-1) factor
    let b = table.batch_u.len();
    let mut stderr = vec![0.0; steps];
    if b > 1 {
        let mut spread = vec![Welford::default(); steps];
        for (bu, bs) in table.batch_u.iter().zip(&table.batch_second) {
            let ug = GridFunction::new(dt, bu.clone())?;
            let d = op.apply_all(&ug)?;
            for j in 0..steps {
                spread[j].push(d[j] + bs[j + 1] - bu[j + 1]);
            }
        }
        for j in 0..steps {
            stderr[j] = (spread[j].variance() / b as f64).sqrt();
        }
    }

    let coarse_steps = steps / 2;
    let coarse_u: Vec<f64> = (0..=coarse_steps).map(|j| table.u_hat[2 * j]).collect();
    let coarse_s: Vec<f64> = (0..=coarse_steps).map(|j| table.sigma_hat[2 * j]).collect();
    let coarse_op = CorrectedOperator::new(spec, 2.0 * dt, coarse_steps)?;
    let coarse = residual_on(&coarse_op, &coarse_u, &coarse_s, 2.0 * dt)?;
    let discretization = (1..=coarse_steps)
        .map(|j| (coarse[j - 1] - residual[2 * j - 1]).abs())
        .fold(0.0, f64::max);

    let max_residual = residual.iter().map(|r| r.abs()).fold(0.0, f64::max);
    let combined_stderr = stderr.iter().copied().fold(0.0, f64::max);
    Ok(ClosureReport {
        t_grid: t_grid[1..].to_vec(),
        residual,
        stderr,
        max_residual,
        combined_stderr,
        discretization,
        threshold: 5.0 * (combined_stderr + discretization),
    })
}

fn residual_on(op: &CorrectedOperator, u: &[f64], sigma: &[f64], dt: f64) -> Result<Vec<f64>> {
    let ug = GridFunction::new(dt, u.to_vec())?;
    let sg = GridFunction::new(dt, sigma.to_vec())?;
    crate::solver::logistic_residual(op, &ug, &sg)
}

/// Largest order accepted by the collocation search.
pub const MAX_CONJECTURE_ORDER: usize = 25;
/// Scaled condition number above which the collocation is rejected.
pub const CONDITION_LIMIT: f64 = 1e13;

/// Coefficients found by collocation, with the residual they leave.
#[derive(Clone, Debug)]
pub struct ConjectureResult {
    pub coefficients: SeriesCoefficients,
    pub t_grid: Vec<f64>,
    pub residual: Vec<f64>,
    pub max_residual: f64,
    /// Residual at the nodes and the midpoints between them.
    pub refined_t: Vec<f64>,
    pub refined_residual: Vec<f64>,
    pub refined_max: f64,
    pub condition: f64,
    pub iterations: usize,
    pub reg: f64,
}

/// Chebyshev nodes on `(0, x_max]` in `x = φ₁`-scale: `x = t^α` for power
/// symbols, `x = t` otherwise. Returned as times.
pub fn trust_grid(spec: &SymbolSpec, x_max: f64, nodes: usize) -> Result<Vec<f64>> {
    if !(x_max > 0.0) || nodes == 0 {
        return Err(Error::Domain("trust interval needs x_max > 0 and at least one node".into()));
    }
    let power = match spec.family() {
        Family::Identity => 1.0,
        Family::Stable => spec.stable_alpha().expect("stable"),
        _ => 1.0,
    };
    Ok((0..nodes)
        .map(|j| {
            let theta = std::f64::consts::PI * (j as f64 + 0.5) / nodes as f64;
            let x = 0.5 * x_max * (1.0 - theta.cos());
            x.powf(1.0 / power)
        })
        .collect())
}

/// `φ_0..φ_K` at `t`; exact powers of `t^α` in double-double for power symbols.
fn phi_row(spec: &SymbolSpec, order: usize, t: f64) -> Result<Vec<Dd>> {
    let power = match spec.family() {
        Family::Identity => Some(1.0),
        Family::Stable => spec.stable_alpha(),
        _ => None,
    };
    match power {
        Some(alpha) => {
            let x = Dd::from(t.powf(alpha));
            Ok((0..=order)
                .map(|k| {
                    // αk + 1 exactly, so the ladder constants are consistent
                    let z = Dd::from(alpha) * k as f64 + 1.0;
                    x.powi(k as u32).div(gamma_dd(z))
                })
                .collect())
        }
        // Talbot copes with the slowly varying φ_k of logarithmic symbols
        None => (0..=order)
            .map(|k| {
                moment_phi_k_with(spec, k as u32, t, InversionMethod::Talbot)
                    .or_else(|_| moment_phi_k(spec, k as u32, t))
                    .map(Dd::from)
            })
            .collect(),
    }
}

fn dd_residual(table: &[Vec<Dd>], e: &[Dd]) -> Vec<Dd> {
    table
        .iter()
        .map(|phi| {
            let mut u = Dd::ZERO;
            let mut d = Dd::ZERO;
            for (k, ek) in e.iter().enumerate() {
                u += *ek * phi[k];
                if k >= 1 {
                    d += *ek * phi[k - 1];
                }
            }
            d - u * (Dd::ONE - u)
        })
        .collect()
}

fn u_bar(phi: &[Dd], e: &[Dd]) -> f64 {
    let mut u = Dd::ZERO;
    for (k, ek) in e.iter().enumerate() {
        u += *ek * phi[k];
    }
    u.hi
}

/// Least-squares collocation of `𝔇ū = ū(1 - ū)` with `ū = Σ E_k φ_k` and the
/// ladder `𝔇φ_k = φ_{k-1}`, for `E_2..E_K` with `E_0 = u₀`, `E_1 = u₀(1-u₀)`.
pub fn conjecture_search(
    spec: &SymbolSpec,
    u0: f64,
    order: usize,
    t_grid: &[f64],
    reg: f64,
) -> Result<ConjectureResult> {
    if !(u0 > 0.0 && u0 < 1.0) {
        return Err(Error::ParameterDomain(format!("u0 must lie in (0, 1), got {u0}")));
    }
    if !(2..=MAX_CONJECTURE_ORDER).contains(&order) {
        return Err(Error::ParameterDomain(format!(
            "K must lie in 2..={MAX_CONJECTURE_ORDER}, got {order}"
        )));
    }
    if !(reg >= 0.0) || !reg.is_finite() {
        return Err(Error::ParameterDomain(format!("regularization must be ≥ 0, got {reg}")));
    }
    let unknowns = order - 1;
    if t_grid.len() < unknowns {
        return Err(Error::Domain(format!(
            "{} collocation nodes for {unknowns} unknowns; add nodes",
            t_grid.len()
        )));
    }
    if t_grid.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
        return Err(Error::Domain("collocation nodes must be positive and finite".into()));
    }
    let mut nodes = t_grid.to_vec();
    nodes.sort_by(f64::total_cmp);
    let table = nodes
        .iter()
        .map(|&t| phi_row(spec, order, t))
        .collect::<Result<Vec<_>>>()?;

    let mut e: Vec<Dd> = vec![Dd::ZERO; order + 1];
    e[0] = Dd::from(u0);
    e[1] = Dd::from(u0) * (Dd::ONE - Dd::from(u0));

    let m = nodes.len();
    let rows = if reg > 0.0 { m + unknowns } else { m };
    let mut condition = 0.0;
    let mut iterations = 0;
    let mut best = f64::INFINITY;
    let mut stalled = 0;
    for it in 0..60 {
        iterations = it + 1;
        let r = dd_residual(&table, &e);
        let mut jac = DMatrix::<f64>::zeros(rows, unknowns);
        for (j, phi) in table.iter().enumerate() {
            let slope = 1.0 - 2.0 * u_bar(phi, &e);
            for i in 0..unknowns {
                let k = i + 2;
                jac[(j, i)] = phi[k - 1].hi - slope * phi[k].hi;
            }
        }
        let scale: Vec<f64> = (0..unknowns)
            .map(|i| jac.column(i).norm().max(f64::MIN_POSITIVE))
            .collect();
        let mut rhs = DVector::<f64>::zeros(rows);
        for j in 0..m {
            rhs[j] = -r[j].hi;
        }
        for i in 0..unknowns {
            for j in 0..m {
                jac[(j, i)] /= scale[i];
            }
            if reg > 0.0 {
                jac[(m + i, i)] = reg.sqrt() / scale[i];
                rhs[m + i] = -reg.sqrt() * e[i + 2].hi;
            }
        }
        let svd = jac.svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        condition = smax / smin;
        if !(condition <= CONDITION_LIMIT) {
            return Err(Error::Conditioning(format!(
                "scaled collocation matrix has condition {condition:.3e} > {CONDITION_LIMIT:.0e}; \
                 lower K (now {order}), shrink the trust interval, or add reg > 0"
            )));
        }
        let y = svd
            .solve(&rhs, 0.0)
            .map_err(|e| Error::Conditioning(format!("least-squares solve failed: {e}")))?;
        for i in 0..unknowns {
            e[i + 2] += Dd::from(y[i] / scale[i]);
        }
        // corrections below one ulp of E still matter: refinement runs
        // until the double-double residual stops shrinking
        let norm = dd_residual(&table, &e)
            .iter()
            .map(|x| x.hi * x.hi)
            .sum::<f64>()
            .sqrt();
        if norm == 0.0 {
            break;
        }
        if norm < best * 0.9 {
            best = norm;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= 3 && it >= 8 {
                break;
            }
        }
    }

    let residual: Vec<f64> = dd_residual(&table, &e).iter().map(|x| x.hi).collect();
    let max_residual = residual.iter().map(|x| x.abs()).fold(0.0, f64::max);

    let mut refined_t = Vec::with_capacity(2 * m - 1);
    for (j, &t) in nodes.iter().enumerate() {
        refined_t.push(t);
        if j + 1 < m {
            refined_t.push(0.5 * (t + nodes[j + 1]));
        }
    }
    let refined_table = refined_t
        .iter()
        .map(|&t| phi_row(spec, order, t))
        .collect::<Result<Vec<_>>>()?;
    let refined_residual: Vec<f64> = dd_residual(&refined_table, &e).iter().map(|x| x.hi).collect();
    let refined_max = refined_residual.iter().map(|x| x.abs()).fold(0.0, f64::max);

    Ok(ConjectureResult {
        coefficients: SeriesCoefficients {
            kind: CoefficientKind::Conjecture,
            alpha: spec.stable_alpha(),
            u0: Some(u0),
            values: e.iter().map(|x| x.hi).collect(),
        },
        t_grid: nodes,
        residual,
        max_residual,
        refined_t,
        refined_residual,
        refined_max,
        condition,
        iterations,
        reg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::frac_euler_numbers;

    fn stable_half() -> SymbolSpec {
        SymbolSpec::stable(0.5).unwrap()
    }

    #[test]
    fn constant_functional_is_exact() {
        let cfg = McConfig::default();
        let one = |_: f64| 0.3;
        let e = estimate_functional(&stable_half(), &one, 1.0, 500, 1, &cfg).unwrap();
        assert_eq!(e.mean, 0.3);
        assert_eq!(e.sample_variance, 0.0);
        let table = estimate_variance_sigma(&stable_half(), &one, &[0.0, 0.5, 1.0], 200, 1, &cfg).unwrap();
        assert!(table.sigma_hat.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn zero_time_is_degenerate() {
        let cfg = McConfig::default();
        let v = |x: f64| logistic_curve(0.5, x);
        let table = estimate_variance_sigma(&stable_half(), &v, &[0.0, 0.1], 300, 3, &cfg).unwrap();
        assert_eq!(table.u_hat[0], 0.5);
        assert_eq!(table.sigma_hat[0], 0.0);
        assert!(table.sigma_hat[1] > 0.0);
    }

    #[test]
    fn seed_determinism() {
        let cfg = McConfig::default();
        let v = |x: f64| (-x).exp();
        let a = estimate_functional(&stable_half(), &v, 1.0, 1000, 9, &cfg).unwrap();
        let b = estimate_functional(&stable_half(), &v, 1.0, 1000, 9, &cfg).unwrap();
        assert_eq!(a, b);
        let c = estimate_functional(&stable_half(), &v, 1.0, 1000, 10, &cfg).unwrap();
        assert_ne!(a.mean, c.mean);
    }

    #[test]
    fn thread_count_does_not_matter() {
        let cfg = McConfig::default();
        let v = |x: f64| x;
        let spec = SymbolSpec::gamma(1.0, 1.0).unwrap();
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = single.install(|| estimate_functional(&spec, &v, 1.0, 700, 5, &cfg).unwrap());
        let b = many.install(|| estimate_functional(&spec, &v, 1.0, 700, 5, &cfg).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn identity_family_is_deterministic() {
        let cfg = McConfig::default();
        let v = |x: f64| x * x;
        let e = estimate_functional(&SymbolSpec::identity(), &v, 1.5, 10, 0, &cfg).unwrap();
        assert_eq!(e.mean, 2.25);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn crn_mean_is_monotone() {
        let cfg = McConfig::default();
        let v = |x: f64| logistic_curve(0.2, x);
        let grid: Vec<f64> = (0..=40).map(|j| j as f64 * 0.05).collect();
        let table = estimate_variance_sigma(&stable_half(), &v, &grid, 400, 2, &cfg).unwrap();
        assert!(table.u_hat.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn restricted_bounds() {
        let cfg = McConfig::default();
        let one = |_: f64| 1.0;
        let p = estimate_restricted(&stable_half(), &one, 1.0, 0.5, 2000, 4, &cfg).unwrap();
        // H_r = r²/(2Z²) for α = ½, so P(1 < H_r) = erf(r/2)
        let exact = 1.0 - crate::special::functions::erfc(0.25);
        assert!(p.within(exact, 4.0), "{p:?} vs {exact}");
        let all = estimate_restricted(&stable_half(), &one, 1e-4, 50.0, 500, 4, &cfg).unwrap();
        assert_eq!(all.mean, 1.0);
    }

    #[test]
    fn horizon_exhaustion() {
        let cfg = McConfig {
            s_max: 0.01,
            max_doublings: 0,
            ..McConfig::default()
        };
        let v = |x: f64| x;
        let err = estimate_functional(&stable_half(), &v, 100.0, 10, 0, &cfg).unwrap_err();
        assert!(matches!(err, Error::HorizonExceeded { .. }), "{err}");
    }

    #[test]
    fn integrated_gamma_mean() {
        let cfg = McConfig {
            ds: 1e-2,
            ..McConfig::default()
        };
        let one = |_: f64| 1.0;
        let spec = SymbolSpec::gamma(2.0, 4.0).unwrap();
        let e = estimate_integrated(&spec, &one, 3.0, 4000, 8, &cfg).unwrap();
        assert!(e.within(1.5, 4.0), "{e:?}");
    }

    #[test]
    fn conjecture_identity_recovers_taylor() {
        // Taylor coefficients of v0/(v0 + (1-v0)e^{-t}) by series division
        let v0 = 0.3;
        let k_max = 16;
        let mut fact = vec![1.0f64; k_max + 1];
        for k in 1..=k_max {
            fact[k] = fact[k - 1] * k as f64;
        }
        let d: Vec<f64> = (0..=k_max)
            .map(|n| {
                let e = (1.0 - v0) * (-1.0f64).powi(n as i32) / fact[n];
                if n == 0 { v0 + e } else { e }
            })
            .collect();
        let mut q = vec![0.0; k_max + 1];
        for n in 0..=k_max {
            let mut s = if n == 0 { v0 } else { 0.0 };
            for i in 1..=n {
                s -= d[i] * q[n - i];
            }
            q[n] = s / d[0];
        }
        let spec = SymbolSpec::identity();
        let grid = trust_grid(&spec, 0.5, 80).unwrap();
        let res = conjecture_search(&spec, v0, k_max, &grid, 0.0).unwrap();
        for k in 0..=6 {
            let exact = q[k] * fact[k];
            assert!(
                (res.coefficients.values[k] - exact).abs() < 1e-8,
                "k={k}: {} vs {exact}",
                res.coefficients.values[k]
            );
        }
    }

    #[test]
    fn conjecture_stable_recovers_recursion() {
        let spec = stable_half();
        let grid = trust_grid(&spec, 0.3, 120).unwrap();
        let res = conjecture_search(&spec, 0.5, 16, &grid, 0.0).unwrap();
        let exact = frac_euler_numbers(0.5, 0.5, 16).unwrap();
        for k in 0..=8 {
            let err = (res.coefficients.values[k] - exact.values[k]).abs();
            assert!(err < 1e-6, "k={k}: err {err}");
        }
        assert!(res.max_residual < 1e-20, "{}", res.max_residual);
    }

    #[test]
    fn conjecture_rejects_bad_input() {
        let spec = stable_half();
        let grid = trust_grid(&spec, 0.3, 40).unwrap();
        assert!(conjecture_search(&spec, 0.5, 30, &grid, 0.0).is_err());
        assert!(conjecture_search(&spec, 1.5, 5, &grid, 0.0).is_err());
        assert!(conjecture_search(&spec, 0.5, 5, &grid[..2], 0.0).is_err());
    }
}
