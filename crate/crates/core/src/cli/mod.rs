//! The `nlogistic` command suite.
//!
//! Every subcommand writes CSV with one `# key=value;...` metadata line
//! followed by a header. Commands that write files also write a JSON
//! manifest next to the primary output.

pub mod config;
pub mod output;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::parser::ValueSource;
use clap::{ArgMatches, Args, Command, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

use crate::error::{Category, Error, Result};
use crate::growth::{logistic_curve, logistic_integral, Profile};
use crate::mc::{self, McConfig};
use crate::paths;
use crate::series::{self, RecursionBound, SeriesCoefficients};
use crate::solver::{self, GridFunction, NonlocalProblem, Rhs};
use crate::special::{self, mittag_leffler::SERIES_SWITCH, InversionMethod};
use crate::symbols::{Family, SymbolSpec, TailKernel};
use output::{num, ConfigEntry, Meta, RunManifest, Sink, Table};

/// Environment variable that overrides the master seed.
pub const SEED_ENV: &str = "NLOGISTIC_SEED";
pub const DEFAULT_SEED: u64 = 42;
const GLOBALS_WITH_VALUE: [&str; 4] = ["--threads", "--seed", "--config", "--manifest"];

#[derive(Parser, Debug)]
#[command(name = "nlogistic", version, about = "Non-local logistic equations and inverse subordinators")]
pub struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, display_order = 900)]
    pub threads: Option<usize>,
    /// Master seed; overrides NLOGISTIC_SEED and the config file.
    #[arg(long, global = true, display_order = 900)]
    pub seed: Option<u64>,
    /// Flat key=value file whose keys mirror the subcommand's flags.
    #[arg(long, global = true, display_order = 900)]
    pub config: Option<PathBuf>,
    /// Manifest location (default: `<out>.manifest.json`).
    #[arg(long, global = true, display_order = 900)]
    pub manifest: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Commands,
}

#[derive(Subcommand, Debug)]
pub enum Commands {
    /// Laplace exponents and Lévy tails.
    #[command(subcommand)]
    Symbols(SymbolsCmd),
    /// One subordinator path on an operational grid.
    Simulate(SimulateArgs),
    /// Data for the three-panel delay illustration.
    Figure1(Figure1Args),
    /// Mittag-Leffler function, rescaled moments and inverse-subordinator densities.
    #[command(subcommand)]
    Special(SpecialCmd),
    /// Fractional Euler coefficients and their series.
    #[command(subcommand)]
    Series(SeriesCmd),
    /// Time-steps the non-local initial value problem.
    Solve(SolveArgs),
    /// Numerical checks of the identities behind the solver.
    #[command(subcommand)]
    Verify(VerifyCmd),
    /// Monte Carlo estimators.
    #[command(subcommand)]
    Mc(McCmd),
}

fn parse_family(s: &str) -> std::result::Result<Family, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_method(s: &str) -> std::result::Result<InversionMethod, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Args, Debug, Clone)]
pub struct FamilyArgs {
    /// identity, stable, tempered_stable, gamma or inverse_gaussian.
    #[arg(long, default_value = "stable", value_parser = parse_family)]
    pub family: Family,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// Tempering rate of the tempered stable family.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// Gamma family shape-type parameter.
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    /// Gamma family rate.
    #[arg(long, default_value_t = 1.0)]
    pub b: f64,
    #[arg(long = "ig-sigma", default_value_t = 1.0)]
    pub ig_sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::ParameterDomain(format!("alpha must satisfy α∈(0,1], got {alpha}")))
    }
}

impl FamilyArgs {
    pub fn spec(&self) -> Result<SymbolSpec> {
        match self.family {
            Family::Identity => Ok(SymbolSpec::identity()),
            Family::Stable => {
                check_alpha(self.alpha)?;
                if self.alpha == 1.0 {
                    Ok(SymbolSpec::identity())
                } else {
                    SymbolSpec::stable(self.alpha)
                }
            }
            Family::TemperedStable => {
                check_alpha(self.alpha)?;
                SymbolSpec::tempered_stable(self.alpha, self.gamma)
            }
            Family::Gamma => SymbolSpec::gamma(self.a, self.b),
            Family::InverseGaussian => SymbolSpec::inverse_gaussian(self.ig_sigma, self.mu),
            Family::Custom => Err(Error::Capability(
                "custom symbols are only available through the library".into(),
            )),
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct McArgs {
    /// Operational time step.
    #[arg(long, default_value_t = 1e-3)]
    pub ds: f64,
    /// Initial operational horizon; doubled as needed.
    #[arg(long, default_value_t = 16.0)]
    pub smax: f64,
}

impl McArgs {
    fn config(&self) -> McConfig {
        McConfig {
            ds: self.ds,
            s_max: self.smax,
            ..McConfig::default()
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProfileKind {
    Logistic,
    Exp,
    Identity,
    Const,
    Power,
}

#[derive(Args, Debug, Clone)]
pub struct ProfileArgs {
    #[arg(long = "v", value_enum, default_value_t = ProfileKind::Logistic)]
    pub v: ProfileKind,
    #[arg(long, default_value_t = 0.5)]
    pub v0: f64,
    #[arg(long, default_value_t = 1.0)]
    pub decay: f64,
    #[arg(long, default_value_t = 1.0)]
    pub value: f64,
    /// Order of the `x^k/k!` profile.
    #[arg(long = "power-k", default_value_t = 1)]
    pub power_k: u32,
}

impl ProfileArgs {
    fn profile(&self) -> Result<Profile> {
        Ok(match self.v {
            ProfileKind::Logistic => {
                if !(self.v0 > 0.0 && self.v0 < 1.0) {
                    return Err(Error::ParameterDomain(format!("v0 must lie in (0, 1), got {}", self.v0)));
                }
                Profile::Logistic { v0: self.v0 }
            }
            ProfileKind::Exp => Profile::Exponential { decay: self.decay },
            ProfileKind::Identity => Profile::Identity,
            ProfileKind::Const => Profile::Constant { value: self.value },
            ProfileKind::Power => Profile::RescaledPower { k: self.power_k },
        })
    }
}

#[derive(Subcommand, Debug)]
pub enum SymbolsCmd {
    /// Φ(λ) and Φ(λ)/λ at `--lambda`, or Π̄(z) at `--z`.
    Eval(SymbolsEvalArgs),
    /// lim Φ(λ)/λ as λ → 0.
    Limit(SymbolsLimitArgs),
}

#[derive(Args, Debug)]
pub struct SymbolsEvalArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    #[arg(long, value_delimiter = ',', required_unless_present = "z", conflicts_with = "z")]
    pub lambda: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub z: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SymbolsLimitArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    #[arg(long, default_value_t = 1e-3)]
    pub ds: f64,
    #[arg(long, default_value_t = 10.0)]
    pub smax: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct Figure1Args {
    #[arg(long, default_value_t = 0.1)]
    pub v0: f64,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub ds: f64,
    #[arg(long, default_value_t = 10.0)]
    pub smax: f64,
    /// Wall-clock horizon; defaults to H(smax).
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long, default_value_t = 2001)]
    pub points: usize,
    #[arg(long, default_value = "figure1.csv")]
    pub out: PathBuf,
}

#[derive(Subcommand, Debug)]
pub enum SpecialCmd {
    /// Mittag-Leffler E_α(z).
    Ml(MlArgs),
    /// Rescaled moments φ_k(t) = E[L_t^k]/k!.
    Phik(PhikArgs),
    /// Density of L_t for the α-stable subordinator.
    Density(DensityArgs),
}

#[derive(Args, Debug)]
pub struct MlArgs {
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub z: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PhikArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    #[arg(long, default_value_t = 1)]
    pub k: u32,
    #[arg(long, value_delimiter = ',', required = true)]
    pub t: Vec<f64>,
    /// gaver_stehfest or talbot, for symbols without a closed form.
    #[arg(long, default_value = "gaver_stehfest", value_parser = parse_method)]
    pub method: InversionMethod,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DensityArgs {
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    #[arg(long, value_delimiter = ',', required = true)]
    pub x: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum SeriesCmd {
    /// Fractional Euler numbers E_0..E_K.
    Euler(EulerArgs),
    /// Partial sums Σ E_k φ_k(t) on a grid.
    Eval(SeriesEvalArgs),
    /// The West-type series for u0 in (1/2, 1).
    West(WestArgs),
    /// Empirical radius of convergence in x = t^α.
    Radius(RadiusArgs),
}

#[derive(Args, Debug)]
pub struct EulerArgs {
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    pub u0: f64,
    #[arg(long = "K", default_value_t = 20)]
    pub order: usize,
    /// Sum the recursion from i = 1 instead of i = 0.
    #[arg(long = "paper-literal")]
    pub paper_literal: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SeriesEvalArgs {
    /// CSV with columns k and E_k.
    #[arg(long)]
    pub coeffs: PathBuf,
    #[command(flatten)]
    pub family: FamilyArgs,
    #[arg(long, default_value_t = 1.0)]
    pub tmax: f64,
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct WestArgs {
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.6)]
    pub u0: f64,
    #[arg(long, value_delimiter = ',', required = true)]
    pub t: Vec<f64>,
    #[arg(long = "K", default_value_t = 200)]
    pub terms: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RadiusArgs {
    /// CSV with columns k and E_k; otherwise the Euler numbers are generated.
    #[arg(long)]
    pub coeffs: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    pub u0: f64,
    #[arg(long = "K", default_value_t = 40)]
    pub order: usize,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum RhsKind {
    Logistic,
    Linear,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    #[arg(long, value_enum, default_value_t = RhsKind::Logistic)]
    pub rhs: RhsKind,
    /// Decay rate a of the linear right-hand side -a·u.
    #[arg(long, default_value_t = 1.0)]
    pub rate: f64,
    #[arg(long, default_value_t = 0.5)]
    pub u0: f64,
    /// CSV with columns t and sigma (or sigma_hat) on a uniform grid from 0.
    #[arg(long)]
    pub sigma: Option<PathBuf>,
    #[arg(long = "T", default_value_t = 1.0)]
    pub horizon: f64,
    /// Defaults to 1e-4 for the identity family and 1e-3 otherwise.
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum VerifyCmd {
    /// Both sides of 𝔇v = f(v) * Π̄ for v = c·e^{-at} under refinement.
    Lemma31(Lemma31Args),
    /// Residual of 𝔇û + σ̂ - û(1-û) for Monte Carlo (û, σ̂).
    Theorem41(Theorem41Args),
    /// ∫E[v(L_t); L_t < T] dt against lim Φ(λ)/λ · ∫v.
    Delayed(DelayedArgs),
    /// 𝔇φ_k = φ_{k-1} under refinement.
    Ladder(LadderArgs),
}

#[derive(Args, Debug)]
pub struct Lemma31Args {
    #[command(flatten)]
    pub family: FamilyArgs,
    #[arg(long, default_value_t = 1.0)]
    pub decay: f64,
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long = "T", default_value_t = 2.0)]
    pub horizon: f64,
    /// Coarsest step; two halvings follow.
    #[arg(long, default_value_t = 1e-2)]
    pub dt: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct Theorem41Args {
    #[command(flatten)]
    pub family: FamilyArgs,
    #[arg(long, default_value_t = 0.5)]
    pub u0: f64,
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
    #[arg(long, default_value_t = 1e-2)]
    pub dt: f64,
    #[arg(long = "T", default_value_t = 1.0)]
    pub horizon: f64,
    #[command(flatten)]
    pub mc: McArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DelayedArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    #[arg(long, default_value_t = 0.1)]
    pub v0: f64,
    #[arg(long = "T", default_value_t = 10.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
    #[command(flatten)]
    pub mc: McArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct LadderArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    #[arg(long = "kmax", default_value_t = 3)]
    pub k_max: u32,
    #[arg(long = "T", default_value_t = 1.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub dt: f64,
    /// Times at which the two sides are compared.
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,0.75,1")]
    pub times: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum McCmd {
    /// E[v(L_t)] at the requested times.
    Functional(FunctionalArgs),
    /// û and σ̂ = Var[v(L_t)] on a uniform grid.
    Sigma(SigmaArgs),
    /// E[v(L_t); t < H_r].
    Restricted(RestrictedArgs),
    /// Least-squares collocation for the series coefficients.
    Conjecture(ConjectureArgs),
}

#[derive(Args, Debug)]
pub struct FunctionalArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    #[command(flatten)]
    pub profile: ProfileArgs,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub t: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
    #[command(flatten)]
    pub mc: McArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SigmaArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    #[command(flatten)]
    pub profile: ProfileArgs,
    #[arg(long, default_value_t = 1.0)]
    pub tmax: f64,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
    #[command(flatten)]
    pub mc: McArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct RestrictedArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    #[command(flatten)]
    pub profile: ProfileArgs,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
    #[command(flatten)]
    pub mc: McArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ConjectureArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    #[arg(long, default_value_t = 0.5)]
    pub u0: f64,
    #[arg(long = "K", default_value_t = 10)]
    pub order: usize,
    /// Upper end of the collocation range in x = φ₁-scale.
    #[arg(long, default_value_t = 0.3)]
    pub xmax: f64,
    #[arg(long, default_value_t = 120)]
    pub nodes: usize,
    #[arg(long, default_value_t = 0.0)]
    pub reg: f64,
    #[arg(long)]
    pub out: PathBuf,
}

/// The clap command with `args_override_self` set on every level, so a
/// flag repeated later on the command line replaces a config value.
pub fn command() -> Command {
    fn rec(c: Command) -> Command {
        let names: Vec<String> = c.get_subcommands().map(|s| s.get_name().to_string()).collect();
        let mut c = c.args_override_self(true);
        for n in names {
            c = c.mut_subcommand(n, rec);
        }
        c
    }
    rec(Cli::command())
}

fn subcommand_path(m: &ArgMatches) -> (Vec<String>, &ArgMatches) {
    let mut path = Vec::new();
    let mut cur = m;
    while let Some((name, sub)) = cur.subcommand() {
        path.push(name.to_string());
        cur = sub;
    }
    (path, cur)
}

fn find_leaf<'a>(cmd: &'a Command, path: &[String]) -> &'a Command {
    let mut cur = cmd;
    for p in path {
        cur = cur.find_subcommand(p).expect("subcommand present in matches");
    }
    cur
}

struct Ctx {
    seed: u64,
    command: String,
    sink: Sink,
}

impl Ctx {
    fn meta(&self) -> Meta {
        let mut m = Meta::default();
        m.push("command", &self.command)
            .push("version", env!("CARGO_PKG_VERSION"))
            .push("seed", self.seed);
        m
    }

    fn meta_with(&self, spec: &SymbolSpec) -> Meta {
        let mut m = self.meta();
        m.extend_described(&spec.describe());
        m
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Runs the suite on `argv` (including the program name) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let started_at = now();
    let cmd = command();
    let user = match cmd.clone().try_get_matches_from(&argv) {
        Ok(m) => m,
        Err(e) => {
            // required flags may still come from the config file; the merged parse rechecks
            let relaxed = (e.kind() == clap::error::ErrorKind::MissingRequiredArgument)
                .then(|| cmd.clone().ignore_errors(true).try_get_matches_from(&argv).ok())
                .flatten()
                .filter(|m| m.get_one::<PathBuf>("config").is_some());
            match relaxed {
                Some(m) => m,
                None => {
                    let code = if e.use_stderr() { Category::Usage.exit_code() } else { 0 };
                    let _ = e.print();
                    return code;
                }
            }
        }
    };
    let (path, user_leaf) = subcommand_path(&user);
    let leaf_cmd = find_leaf(&cmd, &path);
    let command_name = path.join(" ");

    let config_path: Option<PathBuf> = user.get_one::<PathBuf>("config").cloned();
    let resolved = match &config_path {
        Some(p) => match config::load(p, leaf_cmd) {
            Ok(r) => r,
            Err(e) => return report_error(&e, None, &mut Sink::default()),
        },
        None => config::Resolved::default(),
    };

    let merged = if config_path.is_none() {
        user.clone()
    } else {
        let at = config::leaf_index(&argv, &path, &GLOBALS_WITH_VALUE);
        let mut full = argv[..at].to_vec();
        full.extend(resolved.tokens.iter().cloned());
        full.extend(argv[at..].iter().cloned());
        match cmd.clone().try_get_matches_from(&full) {
            Ok(m) => m,
            Err(e) => {
                let err = Error::Config(e.kind().to_string() + ": " + e.to_string().lines().next().unwrap_or(""));
                return report_error(&err, None, &mut Sink::default());
            }
        }
    };
    let cli = match Cli::from_arg_matches(&merged) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return Category::Usage.exit_code();
        }
    };
    let (_, merged_leaf) = subcommand_path(&merged);

    let (seed, seed_source) = match resolve_seed(cli.seed, &resolved) {
        Ok(s) => s,
        Err(e) => return report_error(&e, None, &mut Sink::default()),
    };
    let threads = cli
        .threads
        .or(resolved.threads)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    if threads == 0 {
        return report_error(&Error::ParameterDomain("--threads must be at least 1".into()), None, &mut Sink::default());
    }

    let out: Option<PathBuf> = merged_leaf.try_get_one::<PathBuf>("out").ok().flatten().cloned();
    let mut ctx = Ctx {
        seed,
        command: command_name.clone(),
        sink: Sink::default(),
    };
    let result = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Capability(format!("cannot build worker pool: {e}")))
        .and_then(|pool| pool.install(|| dispatch(&cli.command, &mut ctx)));

    let exit_code = match &result {
        Ok(()) => 0,
        Err(e) => report_error(e, out.as_deref(), &mut ctx.sink),
    };
    let manifest_path = cli.manifest.clone().or_else(|| {
        if ctx.sink.artifacts.is_empty() && result.is_ok() {
            None
        } else {
            out.as_deref().map(output::manifest_path_for)
        }
    });
    if let Some(mp) = manifest_path {
        let mut snapshot = snapshot(leaf_cmd, user_leaf, merged_leaf, &resolved);
        snapshot.insert(
            "seed".into(),
            ConfigEntry {
                value: seed.to_string(),
                source: seed_source.clone(),
            },
        );
        snapshot.insert(
            "threads".into(),
            ConfigEntry {
                value: threads.to_string(),
                source: if cli.threads.is_some() {
                    "flag"
                } else if resolved.threads.is_some() {
                    "config"
                } else {
                    "default"
                }
                .into(),
            },
        );
        let manifest = RunManifest {
            command_line: argv.iter().map(|a| a.to_string_lossy().into_owned()).collect(),
            subcommand: command_name,
            config_file: config_path.map(|p| p.display().to_string()),
            config: snapshot,
            seed,
            seed_source,
            threads,
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_at,
            finished_at: now(),
            status: if exit_code == 0 { "ok" } else { "error" }.into(),
            exit_code,
            error: result.as_ref().err().map(|e| e.to_string()),
            outputs: ctx.sink.artifacts.clone(),
        };
        if let Err(e) = manifest.write(&mp) {
            let code = report_error(&e, None, &mut Sink::default());
            return if exit_code == 0 { code } else { exit_code };
        }
    }
    exit_code
}

fn resolve_seed(flag: Option<u64>, resolved: &config::Resolved) -> Result<(u64, String)> {
    if let Some(s) = flag {
        return Ok((s, "flag".into()));
    }
    if let Ok(v) = std::env::var(SEED_ENV) {
        let s = v
            .trim()
            .parse()
            .map_err(|e| Error::Config(format!("{SEED_ENV}={v:?} is not a seed: {e}")))?;
        return Ok((s, "env".into()));
    }
    if let Some(s) = resolved.seed {
        return Ok((s, "config".into()));
    }
    Ok((DEFAULT_SEED, "default".into()))
}

fn snapshot(
    leaf: &Command,
    user: &ArgMatches,
    merged: &ArgMatches,
    resolved: &config::Resolved,
) -> BTreeMap<String, ConfigEntry> {
    let mut out = BTreeMap::new();
    for arg in leaf.get_arguments().filter(|a| !a.is_global_set()) {
        let id = arg.get_id().as_str();
        let Some(long) = arg.get_long() else { continue };
        if long == "help" {
            continue;
        }
        let Ok(Some(raw)) = merged.try_get_raw(id) else { continue };
        let value = raw.map(|v| v.to_string_lossy().into_owned()).collect::<Vec<_>>().join(",");
        let source = if user.value_source(id) == Some(ValueSource::CommandLine) {
            "flag"
        } else if resolved.has(long) {
            "config"
        } else {
            "default"
        };
        out.insert(
            long.to_string(),
            ConfigEntry {
                value,
                source: source.into(),
            },
        );
    }
    out
}

/// Prints the error with its category and writes diagnostics for tolerance failures.
fn report_error(e: &Error, out: Option<&Path>, sink: &mut Sink) -> i32 {
    let cat = e.category();
    eprintln!("nlogistic: error category={}: {e}", cat.as_str());
    if cat == Category::Tolerance {
        let mut table = Table::new(&["name", "value"]);
        table.row(vec!["message".into(), e.to_string()]);
        for (k, v) in e.diagnostics() {
            table.row(vec![k.clone(), num(*v)]);
        }
        let mut meta = Meta::default();
        meta.push("category", cat.as_str()).push("version", env!("CARGO_PKG_VERSION"));
        let target = out.map(|p| output::sibling(p, ".diagnostics"));
        if let Err(err) = sink.emit(target.as_deref(), &table, &meta) {
            eprintln!("nlogistic: cannot write diagnostics: {err}");
        } else if let Some(t) = target {
            eprintln!("nlogistic: diagnostics written to {}", t.display());
        }
    }
    cat.exit_code()
}

fn dispatch(cmd: &Commands, ctx: &mut Ctx) -> Result<()> {
    match cmd {
        Commands::Symbols(SymbolsCmd::Eval(a)) => symbols_eval(a, ctx),
        Commands::Symbols(SymbolsCmd::Limit(a)) => symbols_limit(a, ctx),
        Commands::Simulate(a) => simulate(a, ctx),
        Commands::Figure1(a) => figure1(a, ctx),
        Commands::Special(SpecialCmd::Ml(a)) => special_ml(a, ctx),
        Commands::Special(SpecialCmd::Phik(a)) => special_phik(a, ctx),
        Commands::Special(SpecialCmd::Density(a)) => special_density(a, ctx),
        Commands::Series(SeriesCmd::Euler(a)) => series_euler(a, ctx),
        Commands::Series(SeriesCmd::Eval(a)) => series_eval(a, ctx),
        Commands::Series(SeriesCmd::West(a)) => series_west(a, ctx),
        Commands::Series(SeriesCmd::Radius(a)) => series_radius(a, ctx),
        Commands::Solve(a) => solve(a, ctx),
        Commands::Verify(VerifyCmd::Lemma31(a)) => verify_lemma31(a, ctx),
        Commands::Verify(VerifyCmd::Theorem41(a)) => verify_theorem41(a, ctx),
        Commands::Verify(VerifyCmd::Delayed(a)) => verify_delayed(a, ctx),
        Commands::Verify(VerifyCmd::Ladder(a)) => verify_ladder(a, ctx),
        Commands::Mc(McCmd::Functional(a)) => mc_functional(a, ctx),
        Commands::Mc(McCmd::Sigma(a)) => mc_sigma(a, ctx),
        Commands::Mc(McCmd::Restricted(a)) => mc_restricted(a, ctx),
        Commands::Mc(McCmd::Conjecture(a)) => mc_conjecture(a, ctx),
    }
}

fn symbols_eval(a: &SymbolsEvalArgs, ctx: &mut Ctx) -> Result<()> {
    let spec = a.family.spec()?;
    let meta = ctx.meta_with(&spec);
    let table = if !a.lambda.is_empty() {
        let mut t = Table::new(&["lambda", "phi", "phi_over_lambda"]);
        for &l in &a.lambda {
            t.row(vec![num(l), num(spec.phi(l)?), num(spec.phi_over_lambda(l)?)]);
        }
        t
    } else {
        let kernel = TailKernel::new(&spec)?;
        let mut t = Table::new(&["z", "tail"]);
        for &z in &a.z {
            t.row(vec![num(z), num(kernel.tail(z)?)]);
        }
        t
    };
    ctx.sink.emit(a.out.as_deref(), &table, &meta)
}

fn symbols_limit(a: &SymbolsLimitArgs, ctx: &mut Ctx) -> Result<()> {
    let spec = a.family.spec()?;
    let mut t = Table::new(&["limit"]);
    t.row(vec![num(spec.phi_over_lambda_limit())]);
    ctx.sink.emit(None, &t, &ctx.meta_with(&spec))
}

fn simulate(a: &SimulateArgs, ctx: &mut Ctx) -> Result<()> {
    let spec = a.family.spec()?;
    let path = paths::sample_subordinator(&spec, a.ds, a.smax, ctx.seed)?;
    let mut t = Table::new(&["s", "H"]);
    for (i, h) in path.values().iter().enumerate() {
        t.row(vec![num(path.s_at(i)), num(*h)]);
    }
    let mut meta = ctx.meta_with(&spec);
    meta.push("ds", a.ds).push("smax", a.smax);
    ctx.sink.emit(Some(&a.out), &t, &meta)
}

fn figure1(a: &Figure1Args, ctx: &mut Ctx) -> Result<()> {
    check_alpha(a.alpha)?;
    if a.alpha == 1.0 {
        return Err(Error::ParameterDomain(
            "the delay figure needs a non-trivial time change, alpha < 1".into(),
        ));
    }
    let fig = paths::delay_figure(a.v0, a.alpha, a.ds, a.smax, a.horizon, a.points, ctx.seed)?;
    let path = &fig.path;
    let dt = if path.t_grid.len() > 1 { path.t_grid[1] - path.t_grid[0] } else { 0.0 };
    let mut meta = ctx.meta();
    meta.push("family", "stable")
        .push("alpha", a.alpha)
        .push("v0", a.v0)
        .push("ds", a.ds)
        .push("smax", a.smax)
        .push("horizon", num(fig.horizon))
        .push("dt", num(dt))
        .push("longest_plateau", num(path.longest_plateau()));

    let mut combined = Table::new(&["t", "L", "v_of_L"]);
    let mut l_panel = Table::new(&["t", "L"]);
    let mut vl_panel = Table::new(&["t", "v_of_L"]);
    for j in 0..path.t_grid.len() {
        let (t, l, v) = (num(path.t_grid[j]), num(path.l_values[j]), num(path.v_of_l[j]));
        combined.row(vec![t.clone(), l.clone(), v.clone()]);
        l_panel.row(vec![t.clone(), l]);
        vl_panel.row(vec![t, v]);
    }
    let mut v_panel = Table::new(&["s", "v"]);
    for (s, v) in fig.s_grid.iter().zip(&fig.v_values) {
        v_panel.row(vec![num(*s), num(*v)]);
    }
    ctx.sink.emit(Some(&a.out), &combined, &meta)?;
    for (suffix, table) in [("_v", &v_panel), ("_L", &l_panel), ("_vL", &vl_panel)] {
        ctx.sink.emit(Some(&output::sibling(&a.out, suffix)), table, &meta)?;
    }
    Ok(())
}

fn special_ml(a: &MlArgs, ctx: &mut Ctx) -> Result<()> {
    let mut t = Table::new(&["input", "value", "method"]);
    for &z in &a.z {
        let method = if a.alpha == 1.0 || z >= -SERIES_SWITCH { "series" } else { "integral" };
        t.row(vec![num(z), num(special::mittag_leffler(a.alpha, z)?), method.into()]);
    }
    let mut meta = ctx.meta();
    meta.push("function", "mittag_leffler").push("alpha", a.alpha);
    ctx.sink.emit(a.out.as_deref(), &t, &meta)
}

fn special_phik(a: &PhikArgs, ctx: &mut Ctx) -> Result<()> {
    let spec = a.family.spec()?;
    let method = match spec.family() {
        Family::Identity | Family::Stable => "closed_form",
        _ => a.method.as_str(),
    };
    let mut t = Table::new(&["input", "value", "method"]);
    for &x in &a.t {
        t.row(vec![num(x), num(special::moment_phi_k_with(&spec, a.k, x, a.method)?), method.into()]);
    }
    let mut meta = ctx.meta_with(&spec);
    meta.push("function", "phi_k").push("k", a.k);
    ctx.sink.emit(a.out.as_deref(), &t, &meta)
}

fn special_density(a: &DensityArgs, ctx: &mut Ctx) -> Result<()> {
    let mut t = Table::new(&["input", "value", "method"]);
    for &x in &a.x {
        let (v, method) = special::inv_stable_density_traced(a.alpha, a.t, x)?;
        t.row(vec![num(x), num(v), method.into()]);
    }
    let mut meta = ctx.meta();
    meta.push("function", "inv_stable_density").push("alpha", a.alpha).push("t", a.t);
    ctx.sink.emit(a.out.as_deref(), &t, &meta)
}

fn series_euler(a: &EulerArgs, ctx: &mut Ctx) -> Result<()> {
    let bound = if a.paper_literal { RecursionBound::FromOne } else { RecursionBound::Full };
    let c = series::frac_euler_numbers_with(a.alpha, a.u0, a.order, bound)?;
    let mut t = Table::new(&["k", "E_k"]);
    for (k, e) in c.values.iter().enumerate() {
        t.row(vec![k.to_string(), num(*e)]);
    }
    let mut meta = ctx.meta();
    meta.extend_described(&c.describe()).push("paper_literal", a.paper_literal);
    ctx.sink.emit(a.out.as_deref(), &t, &meta)
}

/// Second column of a `k,E_k`-style CSV, ordered by `k`.
pub fn read_coefficients(path: &Path) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_path(path)?;
    let mut rows: Vec<(usize, f64)> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = || Error::Domain(format!("{}: row {} is not `k,E_k`", path.display(), i + 1));
        let k: usize = rec.get(0).ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let e: f64 = rec.get(1).ok_or_else(bad)?.parse().map_err(|_| bad())?;
        rows.push((k, e));
    }
    rows.sort_by_key(|r| r.0);
    if rows.iter().enumerate().any(|(i, r)| r.0 != i) {
        return Err(Error::Domain(format!("{}: k must run 0, 1, 2, ...", path.display())));
    }
    Ok(rows.into_iter().map(|r| r.1).collect())
}

fn series_eval(a: &SeriesEvalArgs, ctx: &mut Ctx) -> Result<()> {
    let spec = a.family.spec()?;
    let coeffs = SeriesCoefficients::custom(read_coefficients(&a.coeffs)?)?;
    if a.steps == 0 || !(a.tmax > 0.0) {
        return Err(Error::Domain("need steps ≥ 1 and tmax > 0".into()));
    }
    let mut t = Table::new(&["t", "u", "trunc_bound"]);
    let mut beyond = 0;
    for j in 0..=a.steps {
        let tj = a.tmax * j as f64 / a.steps as f64;
        let v = series::eval_series(&coeffs, &spec, tj)?;
        beyond += v.beyond_radius as usize;
        t.row(vec![num(tj), num(v.value), num(v.trunc_bound)]);
    }
    let mut meta = ctx.meta_with(&spec);
    meta.push("order", coeffs.order()).push("points_beyond_radius", beyond);
    ctx.sink.emit(Some(&a.out), &t, &meta)
}

fn series_west(a: &WestArgs, ctx: &mut Ctx) -> Result<()> {
    check_alpha(a.alpha)?;
    let mut t = Table::new(&["t", "value", "tail_bound"]);
    for &x in &a.t {
        let w = series::west_series(a.alpha, a.u0, x, a.terms)?;
        t.row(vec![num(x), num(w.value), num(w.tail_bound)]);
    }
    let mut meta = ctx.meta();
    meta.push("alpha", a.alpha).push("u0", a.u0).push("K", a.terms);
    ctx.sink.emit(a.out.as_deref(), &t, &meta)
}

fn series_radius(a: &RadiusArgs, ctx: &mut Ctx) -> Result<()> {
    let (coeffs, alpha) = match &a.coeffs {
        Some(p) => (SeriesCoefficients::custom(read_coefficients(p)?)?, a.alpha),
        None => (series::frac_euler_numbers(a.alpha, a.u0, a.order)?, a.alpha),
    };
    let r = series::estimate_radius_in(&coeffs, alpha)?;
    let mut t = Table::new(&["r", "method", "ratio", "root", "unstable"]);
    t.row(vec![num(r.r), r.method.as_str().into(), num(r.ratio), num(r.root), r.unstable.to_string()]);
    let mut meta = ctx.meta();
    meta.push("alpha", alpha).push("order", coeffs.order());
    ctx.sink.emit(None, &t, &meta)
}

/// Reads `t` and `sigma` (or `sigma_hat`) from a CSV on a uniform grid starting at 0.
pub fn read_sigma(path: &Path) -> Result<GridFunction> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_path(path)?;
    let headers = rdr.headers()?.clone();
    let col = |names: &[&str]| headers.iter().position(|h| names.contains(&h));
    let (Some(tc), Some(sc)) = (col(&["t"]), col(&["sigma", "sigma_hat"])) else {
        return Err(Error::Domain(format!(
            "{}: need columns t and sigma (or sigma_hat)",
            path.display()
        )));
    };
    let (mut ts, mut vs) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Domain(format!("{}: unparsable row {:?}", path.display(), rec)))
        };
        ts.push(parse(tc)?);
        vs.push(parse(sc)?);
    }
    if ts.len() < 2 || ts[0] != 0.0 {
        return Err(Error::Domain(format!("{}: the sigma grid must start at t = 0", path.display())));
    }
    let dt = ts[ts.len() - 1] / (ts.len() - 1) as f64;
    if ts.iter().enumerate().any(|(j, t)| (t - j as f64 * dt).abs() > 1e-9 * dt.max(1.0)) {
        return Err(Error::Domain(format!("{}: the sigma grid is not uniform", path.display())));
    }
    GridFunction::new(dt, vs)
}

fn closed_form(spec: &SymbolSpec, rhs: RhsKind, rate: f64, u0: f64, has_sigma: bool) -> Option<Box<dyn Fn(f64) -> Result<f64>>> {
    if has_sigma {
        return None;
    }
    match (spec.family(), rhs) {
        (Family::Identity, RhsKind::Logistic) => Some(Box::new(move |t| Ok(logistic_curve(u0, t)))),
        (Family::Identity, RhsKind::Linear) => Some(Box::new(move |t| Ok(u0 * (-rate * t).exp()))),
        (Family::Stable, RhsKind::Linear) => {
            let alpha = spec.stable_alpha()?;
            Some(Box::new(move |t| Ok(u0 * special::mittag_leffler(alpha, -rate * t.powf(alpha))?)))
        }
        _ => None,
    }
}

fn solve(a: &SolveArgs, ctx: &mut Ctx) -> Result<()> {
    let spec = a.family.spec()?;
    let dt = a.dt.unwrap_or(if spec.family() == Family::Identity { 1e-4 } else { 1e-3 });
    let rhs = match a.rhs {
        RhsKind::Logistic => Rhs::Logistic,
        RhsKind::Linear => Rhs::Linear { a: a.rate },
    };
    let mut problem = NonlocalProblem::new(spec.clone(), rhs.clone(), a.u0, a.horizon, dt)?;
    if let Some(p) = &a.sigma {
        let sigma = read_sigma(p)?;
        if sigma.horizon() + 1e-12 < a.horizon {
            return Err(Error::Domain(format!(
                "sigma covers [0, {}] but T = {}",
                sigma.horizon(),
                a.horizon
            )));
        }
        problem = problem.with_sigma(sigma);
    }
    let u = solver::solve_ivp(&problem)?;
    let exact = closed_form(&spec, a.rhs, a.rate, a.u0, a.sigma.is_some());
    let mut dev = f64::NAN;
    if let Some(f) = &exact {
        dev = 0.0;
        for (j, v) in u.values.iter().enumerate() {
            dev = dev.max((v - f(u.t(j))?).abs());
        }
    }
    let mut meta = ctx.meta_with(&spec);
    meta.extend_described(&rhs.describe())
        .push("u0", a.u0)
        .push("T", a.horizon)
        .push("dt", dt)
        .push("sigma", a.sigma.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "none".into()));
    if let Some(out) = &a.out {
        let mut t = Table::new(&["t", "u"]);
        for (j, v) in u.values.iter().enumerate() {
            t.row(vec![num(u.t(j)), num(*v)]);
        }
        ctx.sink.emit(Some(out), &t, &meta)?;
    }
    let mut summary = Table::new(&["T", "u_T", "max_abs_dev_closed_form"]);
    summary.row(vec![num(u.horizon()), num(*u.values.last().expect("non-empty grid")), num(dev)]);
    ctx.sink.emit(None, &summary, &meta)
}

fn verify_lemma31(a: &Lemma31Args, ctx: &mut Ctx) -> Result<()> {
    let spec = a.family.spec()?;
    let report = solver::verify_convolved_rhs(&spec, a.decay, a.scale, a.horizon, a.dt)?;
    let levels: Vec<String> = report
        .levels
        .iter()
        .map(|l| format!("{}:{}", num(l.dt), num(l.max_residual)))
        .collect();
    let mut meta = ctx.meta_with(&spec);
    meta.push("decay", a.decay)
        .push("scale", a.scale)
        .push("T", a.horizon)
        .push("levels", levels.join("|"))
        .push("rate", num(report.rate))
        .push("monotone", report.monotone());
    let mut t = Table::new(&["t", "lhs", "rhs", "residual"]);
    for &(x, l, r) in &report.finest {
        t.row(vec![num(x), num(l), num(r), num(l - r)]);
    }
    ctx.sink.emit(a.out.as_deref(), &t, &meta)?;
    if !report.monotone() {
        let diagnostics = report
            .levels
            .iter()
            .map(|l| (format!("max_residual@dt={}", l.dt), l.max_residual))
            .collect();
        return Err(Error::tolerance("residual does not decrease under dt-halving", diagnostics));
    }
    Ok(())
}

fn verify_theorem41(a: &Theorem41Args, ctx: &mut Ctx) -> Result<()> {
    let spec = a.family.spec()?;
    let r = mc::theorem41_closure(&spec, a.u0, a.n, a.dt, a.horizon, ctx.seed, &a.mc.config())?;
    let mut meta = ctx.meta_with(&spec);
    meta.push("u0", a.u0).push("n", a.n).push("dt", a.dt).push("T", a.horizon).push("ds", a.mc.ds);
    if let Some(out) = &a.out {
        let mut t = Table::new(&["t", "residual", "stderr"]);
        for j in 0..r.t_grid.len() {
            t.row(vec![num(r.t_grid[j]), num(r.residual[j]), num(r.stderr[j])]);
        }
        ctx.sink.emit(Some(out), &t, &meta)?;
    }
    let mut s = Table::new(&["max_residual", "combined_stderr", "discretization", "threshold", "passed"]);
    s.row(vec![
        num(r.max_residual),
        num(r.combined_stderr),
        num(r.discretization),
        num(r.threshold),
        r.passed().to_string(),
    ]);
    ctx.sink.emit(None, &s, &meta)?;
    if !r.passed() {
        return Err(Error::tolerance(
            "closure residual exceeds 5·(stderr + discretization)",
            vec![
                ("max_residual".into(), r.max_residual),
                ("combined_stderr".into(), r.combined_stderr),
                ("discretization".into(), r.discretization),
                ("threshold".into(), r.threshold),
            ],
        ));
    }
    Ok(())
}

fn verify_delayed(a: &DelayedArgs, ctx: &mut Ctx) -> Result<()> {
    let spec = a.family.spec()?;
    if !(a.v0 > 0.0 && a.v0 < 1.0) {
        return Err(Error::ParameterDomain(format!("v0 must lie in (0, 1), got {}", a.v0)));
    }
    let v_integral = logistic_integral(a.v0, a.horizon);
    let limit = spec.phi_over_lambda_limit();
    let (lhs, stderr) = if limit.is_finite() {
        let v0 = a.v0;
        let v = move |x: f64| logistic_curve(v0, x);
        let est = mc::estimate_integrated(&spec, &v, a.horizon, a.n, ctx.seed, &a.mc.config())?;
        (est.mean, est.stderr)
    } else {
        (f64::INFINITY, f64::NAN)
    };
    let report = solver::delay_report(&spec, v_integral, lhs);
    let z = if limit.is_finite() && stderr > 0.0 { (lhs - report.rhs) / stderr } else { f64::NAN };
    let mut meta = ctx.meta_with(&spec);
    meta.push("v0", a.v0).push("T", a.horizon).push("n", a.n).push("ds", a.mc.ds);
    let mut t = Table::new(&["lhs", "stderr", "rhs", "v_integral", "limit", "ratio", "classification", "z_score"]);
    t.row(vec![
        num(report.lhs),
        num(stderr),
        num(report.rhs),
        num(report.v_integral),
        num(report.limit),
        num(report.ratio),
        report.classification.as_str().into(),
        num(z),
    ]);
    ctx.sink.emit(a.out.as_deref(), &t, &meta)?;
    if z.abs() > 3.0 {
        return Err(Error::tolerance(
            "Monte Carlo integral differs from lim Φ(λ)/λ · ∫v by more than 3 stderr",
            vec![("lhs".into(), lhs), ("rhs".into(), report.rhs), ("z_score".into(), z)],
        ));
    }
    Ok(())
}

/// Errors below this are rounding noise, e.g. `k = 2` at `α = ½` where `φ₂` is linear.
const LADDER_FLOOR: f64 = 1e-12;

fn verify_ladder(a: &LadderArgs, ctx: &mut Ctx) -> Result<()> {
    let spec = a.family.spec()?;
    let levels = solver::verify_ladder(&spec, a.k_max, a.horizon, a.dt, &a.times)?;
    let mut t = Table::new(&["dt", "k", "max_error"]);
    for l in &levels {
        t.row(vec![num(l.dt), l.k.to_string(), num(l.max_error)]);
    }
    let mut meta = ctx.meta_with(&spec);
    meta.push("T", a.horizon)
        .push("times", a.times.iter().map(|x| num(*x)).collect::<Vec<_>>().join("|"));
    ctx.sink.emit(a.out.as_deref(), &t, &meta)?;
    let mut diagnostics = Vec::new();
    for k in 1..=a.k_max {
        let errs: Vec<f64> = levels.iter().filter(|l| l.k == k).map(|l| l.max_error).collect();
        if errs.windows(2).any(|w| w[1] > w[0] && w[1] > LADDER_FLOOR) {
            diagnostics.extend(errs.iter().map(|e| (format!("k={k}"), *e)));
        }
    }
    if !diagnostics.is_empty() {
        return Err(Error::tolerance("ladder error does not decrease under dt-halving", diagnostics));
    }
    Ok(())
}

fn mc_functional(a: &FunctionalArgs, ctx: &mut Ctx) -> Result<()> {
    let spec = a.family.spec()?;
    let profile = a.profile.profile()?;
    let v = move |x: f64| profile.eval(x);
    let est = mc::estimate_on_grid(&spec, &v, &a.t, a.n, ctx.seed, &a.mc.config())?;
    let mut t = Table::new(&["t", "mean", "stderr", "n"]);
    for (x, e) in a.t.iter().zip(&est) {
        t.row(vec![num(*x), num(e.mean), num(e.stderr), e.n.to_string()]);
    }
    let mut meta = ctx.meta_with(&spec);
    meta.extend_described(&profile.describe()).push("ds", a.mc.ds);
    ctx.sink.emit(a.out.as_deref(), &t, &meta)
}

fn mc_sigma(a: &SigmaArgs, ctx: &mut Ctx) -> Result<()> {
    let spec = a.family.spec()?;
    let profile = a.profile.profile()?;
    if a.steps == 0 || !(a.tmax > 0.0) {
        return Err(Error::Domain("need steps ≥ 1 and tmax > 0".into()));
    }
    let grid: Vec<f64> = (0..=a.steps).map(|j| a.tmax * j as f64 / a.steps as f64).collect();
    let v = move |x: f64| profile.eval(x);
    let s = mc::estimate_variance_sigma(&spec, &v, &grid, a.n, ctx.seed, &a.mc.config())?;
    let mut t = Table::new(&["t", "u_hat", "sigma_hat", "stderr_u", "stderr_sigma"]);
    for j in 0..grid.len() {
        t.row(vec![
            num(s.t_grid[j]),
            num(s.u_hat[j]),
            num(s.sigma_hat[j]),
            num(s.stderr_u[j]),
            num(s.stderr_sigma[j]),
        ]);
    }
    let mut meta = ctx.meta_with(&spec);
    meta.extend_described(&profile.describe()).push("n", a.n).push("ds", a.mc.ds);
    ctx.sink.emit(Some(&a.out), &t, &meta)
}

fn mc_restricted(a: &RestrictedArgs, ctx: &mut Ctx) -> Result<()> {
    let spec = a.family.spec()?;
    let profile = a.profile.profile()?;
    let v = move |x: f64| profile.eval(x);
    let e = mc::estimate_restricted(&spec, &v, a.t, a.r, a.n, ctx.seed, &a.mc.config())?;
    let mut t = Table::new(&["t", "r", "mean", "stderr", "n"]);
    t.row(vec![num(a.t), num(a.r), num(e.mean), num(e.stderr), e.n.to_string()]);
    let mut meta = ctx.meta_with(&spec);
    meta.extend_described(&profile.describe()).push("ds", a.mc.ds);
    ctx.sink.emit(a.out.as_deref(), &t, &meta)
}

fn mc_conjecture(a: &ConjectureArgs, ctx: &mut Ctx) -> Result<()> {
    let spec = a.family.spec()?;
    let grid = mc::trust_grid(&spec, a.xmax, a.nodes)?;
    let r = mc::conjecture_search(&spec, a.u0, a.order, &grid, a.reg)?;
    let mut meta = ctx.meta_with(&spec);
    meta.push("u0", a.u0)
        .push("K", a.order)
        .push("xmax", a.xmax)
        .push("nodes", a.nodes)
        .push("reg", a.reg)
        .push("condition", num(r.condition))
        .push("iterations", r.iterations)
        .push("max_residual", num(r.max_residual))
        .push("refined_max", num(r.refined_max));
    let mut t = Table::new(&["k", "E_hat"]);
    for (k, e) in r.coefficients.values.iter().enumerate() {
        t.row(vec![k.to_string(), num(*e)]);
    }
    ctx.sink.emit(Some(&a.out), &t, &meta)?;
    let mut res = Table::new(&["t", "residual", "node"]);
    for (i, (x, y)) in r.refined_t.iter().zip(&r.refined_residual).enumerate() {
        // nodes and midpoints alternate
        res.row(vec![num(*x), num(*y), (i % 2 == 0).to_string()]);
    }
    ctx.sink.emit(Some(&output::sibling(&a.out, "_residual")), &res, &meta)
}
