//! Command-line front end: layered configuration and one pipeline per
//! subcommand, each emitting a CSV artifact.
//!
//! Configuration is merged from defaults, a `key = value` file, `FLIPSCOPE_*`
//! environment variables and command-line flags, later layers winning.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::connections::{
    self, Detector, LocateOptions, OrbitRole, SliceContext, SliceTarget, Tangency, TangencyConfig,
};
use crate::error::Error;
use crate::flow::IntegratorConfig;
use crate::manifolds::{self, EquilibriumManifold, ManifoldPatch, OrbitManifold};
use crate::model::{self, Params, State};
use crate::orbits::{self, Branch, BranchEnd, BranchPoint, ContinuationControl, MultiplierEvent, SectionMap};
use crate::projection;
use crate::winding::{self, GridSpec, WindingConfig};

/// Exit code of a successful run.
pub const EXIT_OK: i32 = 0;
/// Exit code of a numerical or domain failure.
pub const EXIT_DOMAIN: i32 = 1;
/// Exit code of an invalid configuration.
pub const EXIT_CONFIG: i32 = 2;

/// Prefix of environment overrides.
pub const ENV_PREFIX: &str = "FLIPSCOPE_";

/// Every configuration key accepted in files and environment variables.
pub const KEYS: &[&str] = &[
    "alpha", "mu", "a", "b", "c", "beta", "gamma", "mu_tilde", "delta", "rel_tol", "abs_tol", "t_max",
    "max_step", "out", "workers", "alpha_min", "alpha_max", "mu_min", "mu_max", "n_alpha", "n_mu", "n",
    "skip", "detectors", "tol", "owner", "stability", "cap", "seeds", "role", "quantity", "continue_to",
    "intersect", "offset", "seed",
];

/// Fully merged configuration of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Model parameters; `alpha` and `mu` are only meaningful once set.
    pub params: Params,
    pub alpha: Option<f64>,
    pub mu: Option<f64>,
    pub integrator: IntegratorConfig,
    pub out: Option<PathBuf>,
    pub workers: usize,
    pub options: Options,
}

/// Subcommand-specific settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Options {
    pub alpha_min: Option<f64>,
    pub alpha_max: Option<f64>,
    pub mu_min: Option<f64>,
    pub mu_max: Option<f64>,
    pub n_alpha: usize,
    pub n_mu: usize,
    pub n: usize,
    pub skip: usize,
    pub detectors: Option<Vec<String>>,
    pub tol: Option<f64>,
    pub owner: Option<String>,
    pub stability: Option<String>,
    pub cap: Option<f64>,
    pub seeds: usize,
    pub role: String,
    pub quantity: Option<String>,
    pub continue_to: Option<f64>,
    pub intersect: String,
    pub offset: f64,
    pub seed: Option<[f64; 3]>,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            alpha_min: None,
            alpha_max: None,
            mu_min: None,
            mu_max: None,
            n_alpha: 100,
            n_mu: 100,
            n: 300,
            skip: orbits::N_SKIP,
            detectors: None,
            tol: None,
            owner: None,
            stability: None,
            cap: None,
            seeds: manifolds::DEFAULT_SEEDS,
            role: "o".into(),
            quantity: None,
            continue_to: None,
            intersect: "none".into(),
            offset: manifolds::EPS_2D,
            seed: None,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: Params::reference(f64::NAN, f64::NAN),
            alpha: None,
            mu: None,
            integrator: WindingConfig::default().integrator,
            out: None,
            workers: 1,
            options: Options::default(),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| format!("invalid value {value:?} for {key}: {e}"))
}

fn parse_list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

fn parse_seed(key: &str, value: &str) -> Result<[f64; 3], String> {
    let parts = parse_list(value);
    if parts.len() != 3 {
        return Err(format!("{key} needs three comma-separated coordinates"));
    }
    let mut out = [0.0; 3];
    for (o, p) in out.iter_mut().zip(&parts) {
        *o = parse(key, p)?;
    }
    Ok(out)
}

impl RunConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let key = key.trim().replace('-', "_").to_ascii_lowercase();
        let o = &mut self.options;
        match key.as_str() {
            "alpha" => self.alpha = Some(parse(&key, value)?),
            "mu" => self.mu = Some(parse(&key, value)?),
            "a" => self.params.a = parse(&key, value)?,
            "b" => self.params.b = parse(&key, value)?,
            "c" => self.params.c = parse(&key, value)?,
            "beta" => self.params.beta = parse(&key, value)?,
            "gamma" => self.params.gamma = parse(&key, value)?,
            "mu_tilde" => self.params.mu_tilde = parse(&key, value)?,
            "delta" => self.params.delta = parse(&key, value)?,
            "rel_tol" => self.integrator.rel_tol = parse(&key, value)?,
            "abs_tol" => self.integrator.abs_tol = parse(&key, value)?,
            "t_max" => self.integrator.t_max = parse(&key, value)?,
            "max_step" => self.integrator.max_step = parse(&key, value)?,
            "out" => self.out = Some(PathBuf::from(value.trim())),
            "workers" => self.workers = parse(&key, value)?,
            "alpha_min" => o.alpha_min = Some(parse(&key, value)?),
            "alpha_max" => o.alpha_max = Some(parse(&key, value)?),
            "mu_min" => o.mu_min = Some(parse(&key, value)?),
            "mu_max" => o.mu_max = Some(parse(&key, value)?),
            "n_alpha" => o.n_alpha = parse(&key, value)?,
            "n_mu" => o.n_mu = parse(&key, value)?,
            "n" => o.n = parse(&key, value)?,
            "skip" => o.skip = parse(&key, value)?,
            "detectors" => o.detectors = Some(parse_list(value)),
            "tol" => o.tol = Some(parse(&key, value)?),
            "owner" => o.owner = Some(value.trim().to_string()),
            "stability" => o.stability = Some(value.trim().to_string()),
            "cap" => o.cap = Some(parse(&key, value)?),
            "seeds" => o.seeds = parse(&key, value)?,
            "role" => o.role = value.trim().to_string(),
            "quantity" => o.quantity = Some(value.trim().to_string()),
            "continue_to" => o.continue_to = Some(parse(&key, value)?),
            "intersect" => o.intersect = value.trim().to_string(),
            "offset" => o.offset = parse(&key, value)?,
            "seed" => o.seed = Some(parse_seed(&key, value)?),
            _ => return Err(format!("unknown configuration key {key:?}")),
        }
        Ok(())
    }

    /// Applies a flat `key = value` text; `#` starts a comment.
    pub fn apply_file(&mut self, text: &str) -> Result<(), String> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key = value", i + 1))?;
            self.set(k, v).map_err(|e| format!("line {}: {e}", i + 1))?;
        }
        Ok(())
    }

    /// Applies `FLIPSCOPE_<KEY>` variables; unknown names are rejected.
    /// `FLIPSCOPE_CONFIG` names the configuration file and is skipped here.
    pub fn apply_env(&mut self, env: &BTreeMap<String, String>) -> Result<(), String> {
        for (name, value) in env {
            let Some(key) = name.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            if key == "CONFIG" {
                continue;
            }
            self.set(key, value).map_err(|e| format!("{name}: {e}"))?;
        }
        Ok(())
    }

    fn require_alpha(&self) -> Result<f64, String> {
        self.alpha.ok_or_else(|| "alpha must be supplied".to_string())
    }

    fn require_mu(&self) -> Result<f64, String> {
        self.mu.ok_or_else(|| "mu must be supplied".to_string())
    }

    /// Model parameters at the configured `(alpha, mu)`.
    pub fn point(&self) -> Result<Params, String> {
        let p = Params {
            alpha: self.require_alpha()?,
            mu: self.require_mu()?,
            ..self.params
        };
        if !p.is_finite() {
            return Err("model parameters must be finite".into());
        }
        Ok(p)
    }

    /// Model parameters at the configured α with μ left at zero.
    fn slice_base(&self) -> Result<Params, String> {
        let p = Params {
            alpha: self.require_alpha()?,
            mu: 0.0,
            ..self.params
        };
        if !p.is_finite() {
            return Err("model parameters must be finite".into());
        }
        Ok(p)
    }

    fn validate_common(&self) -> Result<(), String> {
        self.integrator.validate().map_err(|e| e.to_string())?;
        if self.workers == 0 {
            return Err("workers must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Parser)]
#[command(name = "flipscope", version, about = "Numerical study of a case-C inclination flip")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Winding-number raster over an (alpha, mu) rectangle.
    Sweep(SweepArgs),
    /// Locates codimension-one points along a slice of fixed alpha.
    Slice(SliceArgs),
    /// Locates a saddle periodic orbit, optionally continuing it in mu.
    Orbit(OrbitArgs),
    /// Grows an invariant manifold of 0, q, Γ_o or Γ_t.
    Manifold(ManifoldArgs),
    /// Evaluates one connection measurement at a parameter point.
    Connect(ConnectArgs),
    /// Locates the inclination flip along mu = 0.
    Flip(FlipArgs),
    /// Stereographic projection of a manifold's sphere intersection.
    Project(ManifoldArgs),
    /// First-return map of an attracting trajectory on y = 0.
    Returnmap(ReturnArgs),
}

#[derive(Debug, Args, Default)]
struct CommonArgs {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    a: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    b: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    c: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    mu_tilde: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    delta: Option<f64>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    abs_tol: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    max_step: Option<f64>,
}

#[derive(Debug, Args)]
struct PointArgs {
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    mu: Option<f64>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, allow_negative_numbers = true)]
    alpha_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    alpha_max: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    mu_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    mu_max: Option<f64>,
    #[arg(long)]
    n_alpha: Option<usize>,
    #[arg(long)]
    n_mu: Option<usize>,
}

#[derive(Debug, Args)]
struct SliceArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    mu_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    mu_max: Option<f64>,
    /// Comma-separated subset of split, zeta, gap-o, gap-t, pd, snp, cc,
    /// tan, f; the reference set of the alpha = 0.5 slice when absent.
    #[arg(long)]
    detectors: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seeds: Option<usize>,
}

#[derive(Debug, Args)]
struct OrbitArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    point: PointArgs,
    /// `o` for Γ_o or `t` for Γ_t.
    #[arg(long)]
    role: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    continue_to: Option<f64>,
}

#[derive(Debug, Args)]
struct ManifoldArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    point: PointArgs,
    /// `0`, `q`, `gamma-o` or `gamma-t`.
    #[arg(long)]
    owner: Option<String>,
    /// `stable`, `unstable` or `strong-stable`.
    #[arg(long)]
    stability: Option<String>,
    #[arg(long)]
    cap: Option<f64>,
    #[arg(long)]
    seeds: Option<usize>,
    /// `none` for trajectories or `sphere` for the sphere intersection.
    #[arg(long)]
    intersect: Option<String>,
}

#[derive(Debug, Args)]
struct ConnectArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    point: PointArgs,
    /// `split`, `zeta`, `gap-o`, `gap-t`, `orientation`, `tan` or `f`.
    #[arg(long)]
    quantity: Option<String>,
    #[arg(long)]
    seeds: Option<usize>,
}

#[derive(Debug, Args)]
struct FlipArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, allow_negative_numbers = true)]
    alpha_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    alpha_max: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Debug, Args)]
struct ReturnArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    point: PointArgs,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    skip: Option<usize>,
    /// Start point `x,y,z`; the unstable Floquet seed of Γ_o when absent.
    #[arg(long, allow_negative_numbers = true)]
    seed: Option<String>,
    #[arg(long)]
    offset: Option<f64>,
}

/// Flag values as `(key, text)` pairs, applied through the same path as the
/// other layers.
#[derive(Default)]
struct Flags(Vec<(&'static str, String)>);

impl Flags {
    fn put<T: ToString>(&mut self, key: &'static str, v: Option<T>) {
        if let Some(v) = v {
            self.0.push((key, v.to_string()));
        }
    }

    fn common(&mut self, c: CommonArgs) -> Option<PathBuf> {
        self.put("out", c.out.map(|p| p.display().to_string()));
        self.put("workers", c.workers);
        self.put("a", c.a);
        self.put("b", c.b);
        self.put("c", c.c);
        self.put("beta", c.beta);
        self.put("gamma", c.gamma);
        self.put("mu_tilde", c.mu_tilde);
        self.put("delta", c.delta);
        self.put("rel_tol", c.rel_tol);
        self.put("abs_tol", c.abs_tol);
        self.put("t_max", c.t_max);
        self.put("max_step", c.max_step);
        c.config
    }

    fn point(&mut self, p: PointArgs) {
        self.put("alpha", p.alpha);
        self.put("mu", p.mu);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pipeline {
    Sweep,
    Slice,
    Orbit,
    Manifold,
    Connect,
    Flip,
    Project,
    Returnmap,
}

impl Pipeline {
    fn name(self) -> &'static str {
        match self {
            Pipeline::Sweep => "sweep",
            Pipeline::Slice => "slice",
            Pipeline::Orbit => "orbit",
            Pipeline::Manifold => "manifold",
            Pipeline::Connect => "connect",
            Pipeline::Flip => "flip",
            Pipeline::Project => "project",
            Pipeline::Returnmap => "returnmap",
        }
    }
}

fn split_command(cmd: Command) -> (Pipeline, Option<PathBuf>, Flags) {
    let mut f = Flags::default();
    let (pipe, config) = match cmd {
        Command::Sweep(a) => {
            let cfg = f.common(a.common);
            f.put("alpha_min", a.alpha_min);
            f.put("alpha_max", a.alpha_max);
            f.put("mu_min", a.mu_min);
            f.put("mu_max", a.mu_max);
            f.put("n_alpha", a.n_alpha);
            f.put("n_mu", a.n_mu);
            (Pipeline::Sweep, cfg)
        }
        Command::Slice(a) => {
            let cfg = f.common(a.common);
            f.put("alpha", a.alpha);
            f.put("mu_min", a.mu_min);
            f.put("mu_max", a.mu_max);
            f.put("detectors", a.detectors);
            f.put("tol", a.tol);
            f.put("seeds", a.seeds);
            (Pipeline::Slice, cfg)
        }
        Command::Orbit(a) => {
            let cfg = f.common(a.common);
            f.point(a.point);
            f.put("role", a.role);
            f.put("continue_to", a.continue_to);
            (Pipeline::Orbit, cfg)
        }
        Command::Manifold(a) => {
            let cfg = manifold_flags(&mut f, a);
            (Pipeline::Manifold, cfg)
        }
        Command::Project(a) => {
            let cfg = manifold_flags(&mut f, a);
            (Pipeline::Project, cfg)
        }
        Command::Connect(a) => {
            let cfg = f.common(a.common);
            f.point(a.point);
            f.put("quantity", a.quantity);
            f.put("seeds", a.seeds);
            (Pipeline::Connect, cfg)
        }
        Command::Flip(a) => {
            let cfg = f.common(a.common);
            f.put("alpha_min", a.alpha_min);
            f.put("alpha_max", a.alpha_max);
            f.put("tol", a.tol);
            (Pipeline::Flip, cfg)
        }
        Command::Returnmap(a) => {
            let cfg = f.common(a.common);
            f.point(a.point);
            f.put("n", a.n);
            f.put("skip", a.skip);
            f.put("seed", a.seed);
            f.put("offset", a.offset);
            (Pipeline::Returnmap, cfg)
        }
    };
    (pipe, config, f)
}

fn manifold_flags(f: &mut Flags, a: ManifoldArgs) -> Option<PathBuf> {
    let cfg = f.common(a.common);
    f.point(a.point);
    f.put("owner", a.owner);
    f.put("stability", a.stability);
    f.put("cap", a.cap);
    f.put("seeds", a.seeds);
    f.put("intersect", a.intersect);
    cfg
}

enum Failure {
    Config(String),
    Domain(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) | Error::InvalidConfig(m) => Failure::Config(m),
            e => Failure::Domain(e),
        }
    }
}

impl From<String> for Failure {
    fn from(m: String) -> Self {
        Failure::Config(m)
    }
}

/// CSV text plus a human-readable summary.
struct Artifact {
    csv: String,
    summary: String,
}

fn csv_of<F>(write: F) -> String
where
    F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
{
    let mut buf = Vec::new();
    write(&mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("CSV writers emit UTF-8")
}

/// Runs the CLI with the process environment; returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let env: BTreeMap<String, String> = std::env::vars().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
    run_with_env(argv, &env)
}

/// Runs the CLI with an explicit set of `FLIPSCOPE_*` variables.
pub fn run_with_env<I, T>(argv: I, env: &BTreeMap<String, String>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let (pipe, config_path, flags) = split_command(cli.command);
    let cfg = match build_config(config_path, env, &flags) {
        Ok(c) => c,
        Err(m) => {
            eprintln!("flipscope {}: configuration error: {m}", pipe.name());
            return EXIT_CONFIG;
        }
    };
    match execute(pipe, &cfg) {
        Ok(art) => match emit(&cfg, &art) {
            Ok(()) => EXIT_OK,
            Err(e) => {
                eprintln!("flipscope {}: cannot write output: {e}", pipe.name());
                EXIT_DOMAIN
            }
        },
        Err(Failure::Config(m)) => {
            eprintln!("flipscope {}: configuration error: {m}", pipe.name());
            EXIT_CONFIG
        }
        Err(Failure::Domain(e)) => {
            eprintln!(
                "flipscope {}: {e} (alpha = {}, mu = {})",
                pipe.name(),
                show(cfg.alpha),
                show(cfg.mu)
            );
            EXIT_DOMAIN
        }
    }
}

fn show(v: Option<f64>) -> String {
    v.map_or_else(|| "unset".into(), |v| v.to_string())
}

fn build_config(
    config_path: Option<PathBuf>,
    env: &BTreeMap<String, String>,
    flags: &Flags,
) -> Result<RunConfig, String> {
    let mut cfg = RunConfig::default();
    let path = config_path.or_else(|| env.get("FLIPSCOPE_CONFIG").map(PathBuf::from));
    if let Some(path) = path {
        let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        cfg.apply_file(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    cfg.apply_env(env)?;
    for (k, v) in &flags.0 {
        cfg.set(k, v)?;
    }
    cfg.validate_common()?;
    Ok(cfg)
}

fn emit(cfg: &RunConfig, art: &Artifact) -> std::io::Result<()> {
    match &cfg.out {
        Some(path) => {
            std::fs::write(path, &art.csv)?;
            print!("{}", art.summary);
        }
        None => {
            print!("{}", art.csv);
            eprint!("{}", art.summary);
        }
    }
    Ok(())
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, Failure> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Failure::Config(e.to_string()))
}

/// Parses, validates and runs one pipeline without writing anything.
fn execute(pipe: Pipeline, cfg: &RunConfig) -> Result<Artifact, Failure> {
    match pipe {
        Pipeline::Sweep => sweep(cfg),
        Pipeline::Slice => {
            let targets = slice_targets(cfg)?;
            let base = cfg.slice_base()?;
            pool(cfg.workers)?.install(|| slice(cfg, &base, &targets))
        }
        Pipeline::Orbit => orbit(cfg),
        Pipeline::Manifold | Pipeline::Project => {
            let spec = manifold_spec(cfg)?;
            let p = cfg.point()?;
            pool(cfg.workers)?.install(|| manifold(cfg, &p, &spec, pipe == Pipeline::Project))
        }
        Pipeline::Connect => connect(cfg),
        Pipeline::Flip => flip(cfg),
        Pipeline::Returnmap => returnmap(cfg),
    }
}

fn range(name: &str, lo: Option<f64>, hi: Option<f64>) -> Result<(f64, f64), String> {
    let lo = lo.ok_or_else(|| format!("{name}_min must be supplied"))?;
    let hi = hi.ok_or_else(|| format!("{name}_max must be supplied"))?;
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(format!("{name} range must be finite with min ≤ max (got [{lo}, {hi}])"));
    }
    Ok((lo, hi))
}

fn sweep(cfg: &RunConfig) -> Result<Artifact, Failure> {
    let o = &cfg.options;
    let spec = GridSpec {
        alpha_range: range("alpha", o.alpha_min, o.alpha_max)?,
        mu_range: range("mu", o.mu_min, o.mu_max)?,
        n_alpha: o.n_alpha,
        n_mu: o.n_mu,
    };
    spec.validate()?;
    let wcfg = WindingConfig {
        integrator: cfg.integrator,
        ..WindingConfig::default()
    };
    let base = Params {
        alpha: spec.alpha_range.0,
        mu: spec.mu_range.0,
        ..cfg.params
    };
    let grid = winding::sweep_zeta(&base, &spec, &wcfg, cfg.workers)?;
    let mut hist: BTreeMap<i64, usize> = BTreeMap::new();
    let mut failed = 0;
    for c in &grid.cells {
        match c {
            Ok(r) => *hist.entry(r.zeta.code()).or_default() += 1,
            Err(_) => failed += 1,
        }
    }
    let mut summary = format!("sweep: {} cells", grid.cells.len());
    for (z, n) in &hist {
        let label = if *z < 0 { "saturated".to_string() } else { format!("zeta={z}") };
        let _ = write!(summary, ", {label}: {n}");
    }
    if failed > 0 {
        let _ = write!(summary, ", failed: {failed}");
    }
    summary.push('\n');
    Ok(Artifact {
        csv: csv_of(|w| grid.write_csv(w)),
        summary,
    })
}

fn detector_by_name(name: &str) -> Result<Detector, String> {
    use MultiplierEvent::*;
    Ok(match name.to_ascii_lowercase().as_str() {
        "split" => Detector::Split,
        "zeta" => Detector::ZetaChange,
        "gap-o" | "gap_o" => Detector::Gap(OrbitRole::GammaO),
        "gap-t" | "gap_t" => Detector::Gap(OrbitRole::GammaT),
        "pd" => Detector::Multiplier(MinusOne),
        "snp" => Detector::Multiplier(PlusOne),
        "cc" => Detector::Multiplier(ComplexCollision),
        "tan" => Detector::Tangency(Tangency::Homoclinic(OrbitRole::GammaO)),
        "f" => Detector::Tangency(Tangency::StableOrigin(OrbitRole::GammaO)),
        other => return Err(format!("unknown detector {other:?}")),
    })
}

fn slice_targets(cfg: &RunConfig) -> Result<Vec<(Option<&'static str>, Detector, (f64, f64))>, String> {
    let o = &cfg.options;
    match &o.detectors {
        Some(names) => {
            let bracket = range("mu", o.mu_min, o.mu_max)?;
            if names.is_empty() {
                return Err("detectors list is empty".into());
            }
            names
                .iter()
                .map(|n| detector_by_name(n).map(|d| (None, d, bracket)))
                .collect()
        }
        None => {
            let lo = o.mu_min.unwrap_or(f64::NEG_INFINITY);
            let hi = o.mu_max.unwrap_or(f64::INFINITY);
            if lo > hi {
                return Err(format!("mu range must have min ≤ max (got [{lo}, {hi}])"));
            }
            Ok(connections::reference_slice_targets()
                .into_iter()
                .filter(|t: &SliceTarget| t.bracket.0 >= lo && t.bracket.1 <= hi)
                .map(|t| (Some(t.kind), t.detector, t.bracket))
                .collect())
        }
    }
}

fn tangency_config(cfg: &RunConfig) -> TangencyConfig {
    TangencyConfig {
        n_seeds: cfg.options.seeds,
        ..TangencyConfig::default()
    }
}

fn slice(
    cfg: &RunConfig,
    base: &Params,
    targets: &[(Option<&'static str>, Detector, (f64, f64))],
) -> Result<Artifact, Failure> {
    let ctx = SliceContext::standard(base)?;
    let mut points = Vec::with_capacity(targets.len());
    for (kind, det, bracket) in targets {
        let opts = LocateOptions {
            tol: cfg.options.tol,
            kind: kind.map(str::to_string),
            tangency: tangency_config(cfg),
        };
        points.push(connections::locate_bifurcation(&ctx, *bracket, *det, &opts)?);
    }
    points.sort_by(|a, b| b.mu.total_cmp(&a.mu));
    let mut summary = String::new();
    for b in &points {
        let _ = writeln!(summary, "{b}");
    }
    Ok(Artifact {
        csv: csv_of(|w| connections::write_bifurcation_csv(&points, w)),
        summary,
    })
}

fn role(cfg: &RunConfig) -> Result<OrbitRole, String> {
    match cfg.options.role.to_ascii_lowercase().as_str() {
        "o" | "gamma-o" | "gamma_o" => Ok(OrbitRole::GammaO),
        "t" | "gamma-t" | "gamma_t" => Ok(OrbitRole::GammaT),
        other => Err(format!("unknown orbit role {other:?}")),
    }
}

fn orbit(cfg: &RunConfig) -> Result<Artifact, Failure> {
    let p = cfg.point()?;
    let r = role(cfg)?;
    let ctx = SliceContext::standard(&p)?;
    let o = ctx.orbit(r, p.mu)?;
    let branch = match cfg.options.continue_to {
        Some(target) => orbits::continue_orbit(&o, target, &ContinuationControl::default())?,
        None => Branch {
            points: vec![BranchPoint {
                mu: p.mu,
                orbit: o.clone(),
            }],
            end: BranchEnd::ReachedTarget,
        },
    };
    let det = o.monodromy_determinant()?;
    let summary = format!(
        "{}: period {:.10}, multipliers ({:.6e}, {:.6e}), {}, det(M) {:.6e}, exp(∫tr) {:.6e}, branch points {}\n",
        o.label,
        o.period,
        o.multipliers[0],
        o.multipliers[1],
        o.orientability,
        det,
        o.trace_integral.exp(),
        branch.points.len()
    );
    Ok(Artifact {
        csv: csv_of(|w| branch.write_csv(w)),
        summary,
    })
}

struct ManifoldSpec {
    owner: String,
    stability: String,
    cap: Option<f64>,
}

fn manifold_spec(cfg: &RunConfig) -> Result<ManifoldSpec, String> {
    let o = &cfg.options;
    let owner = o.owner.clone().ok_or("owner must be supplied")?.to_ascii_lowercase();
    let stability = o.stability.clone().ok_or("stability must be supplied")?.to_ascii_lowercase();
    if !["0", "q", "gamma-o", "gamma-t"].contains(&owner.as_str()) {
        return Err(format!("unknown manifold owner {owner:?}"));
    }
    let is_orbit = owner.starts_with("gamma");
    let allowed: &[&str] = if is_orbit {
        &["stable", "unstable"]
    } else {
        &["stable", "unstable", "strong-stable"]
    };
    if !allowed.contains(&stability.as_str()) {
        return Err(format!("stability {stability:?} is not available for owner {owner:?}"));
    }
    if !["none", "sphere"].contains(&o.intersect.as_str()) {
        return Err(format!("unknown intersect mode {:?}", o.intersect));
    }
    if let Some(c) = o.cap {
        if !(c > 0.0) {
            return Err("cap must be positive".into());
        }
    }
    if o.seeds == 0 {
        return Err("seeds must be positive".into());
    }
    Ok(ManifoldSpec {
        owner,
        stability,
        cap: o.cap,
    })
}

fn grow(cfg: &RunConfig, p: &Params, spec: &ManifoldSpec) -> Result<ManifoldPatch, Failure> {
    let n = cfg.options.seeds;
    let patch = match spec.owner.as_str() {
        "0" | "q" => {
            let eq = if spec.owner == "0" {
                model::origin_equilibrium(p)
            } else {
                model::find_q(p)?
            };
            let which = match spec.stability.as_str() {
                "stable" => EquilibriumManifold::Stable2d,
                "unstable" => EquilibriumManifold::Unstable1d,
                _ => EquilibriumManifold::StrongStable1d,
            };
            let default_cap = match which {
                EquilibriumManifold::Stable2d => manifolds::CAP_EQUILIBRIUM,
                _ => manifolds::CAP_ORBIT,
            };
            manifolds::grow_equilibrium_manifold(p, &eq, which, spec.cap.unwrap_or(default_cap), n)?
        }
        owner => {
            let r = if owner == "gamma-o" { OrbitRole::GammaO } else { OrbitRole::GammaT };
            let orbit = SliceContext::standard(p)?.orbit(r, p.mu)?;
            let which = if spec.stability == "stable" {
                OrbitManifold::Stable
            } else {
                OrbitManifold::Unstable
            };
            manifolds::grow_orbit_manifold(p, &orbit, which, spec.cap.unwrap_or(manifolds::CAP_ORBIT), n)?
        }
    };
    Ok(patch)
}

fn manifold(cfg: &RunConfig, p: &Params, spec: &ManifoldSpec, project: bool) -> Result<Artifact, Failure> {
    let patch = grow(cfg, p, spec)?;
    let label = patch.label();
    if project {
        let curves = manifolds::intersect_with_sphere(&patch);
        let set = projection::project_set(&curves)?;
        let summary = format!(
            "{label}: {} projected curves, {} pole splits\n",
            set.curves.len(),
            set.pole_splits
        );
        return Ok(Artifact {
            csv: csv_of(|w| set.write_csv(w)),
            summary,
        });
    }
    if cfg.options.intersect == "sphere" {
        let curves = manifolds::intersect_with_sphere(&patch);
        let summary = format!(
            "{label}: {} sphere curves, {} points\n",
            curves.curves.len(),
            curves.point_count()
        );
        return Ok(Artifact {
            csv: csv_of(|w| curves.write_csv(w)),
            summary,
        });
    }
    let summary = format!(
        "{label}: {} trajectories, {} boundary circles\n",
        patch.trajectories.len(),
        patch.boundary_circles()
    );
    Ok(Artifact {
        csv: csv_of(|w| patch.write_csv(w)),
        summary,
    })
}

fn connect(cfg: &RunConfig) -> Result<Artifact, Failure> {
    let p = cfg.point()?;
    let quantity = cfg
        .options
        .quantity
        .clone()
        .ok_or_else(|| "quantity must be supplied".to_string())?
        .to_ascii_lowercase();
    let value: f64 = match quantity.as_str() {
        "split" => connections::homoclinic_split(&p)?.value.signed().unwrap_or(f64::NAN),
        "zeta" => {
            let wcfg = WindingConfig {
                integrator: cfg.integrator,
                ..WindingConfig::default()
            };
            winding::compute_zeta_with(&p, &wcfg)?.zeta.code() as f64
        }
        "orientation" => connections::orientation_index(&p)?,
        "gap-o" | "gap-t" => {
            let r = if quantity == "gap-o" { OrbitRole::GammaO } else { OrbitRole::GammaT };
            let target = SliceContext::standard(&p)?.orbit(r, p.mu)?;
            connections::hetero_gap(&p, &target)?.value.signed().unwrap_or(f64::NAN)
        }
        "tan" | "f" => {
            if cfg.options.seeds == 0 {
                return Err(Failure::Config("seeds must be positive".into()));
            }
            let which = if quantity == "tan" {
                Tangency::Homoclinic(OrbitRole::GammaO)
            } else {
                Tangency::StableOrigin(OrbitRole::GammaO)
            };
            let ctx = SliceContext::standard(&p)?;
            pool(cfg.workers)?.install(|| connections::tangency_at(&ctx, which, &tangency_config(cfg), p.mu))? as f64
        }
        other => return Err(Failure::Config(format!("unknown quantity {other:?}"))),
    };
    use crate::io::num;
    let csv = format!("quantity,alpha,mu,value\n{quantity},{},{},{}\n", num(p.alpha), num(p.mu), num(value));
    Ok(Artifact {
        csv,
        summary: format!("{quantity} at (alpha, mu) = ({}, {}): {value:e}\n", p.alpha, p.mu),
    })
}

fn flip(cfg: &RunConfig) -> Result<Artifact, Failure> {
    let o = &cfg.options;
    let bracket = range("alpha", o.alpha_min, o.alpha_max)?;
    let tol = o.tol.unwrap_or(1e-8);
    if !(tol > 0.0) {
        return Err(Failure::Config("tol must be positive".into()));
    }
    let base = Params {
        alpha: bracket.0,
        mu: 0.0,
        ..cfg.params
    };
    let b = connections::locate_inclination_flip(&base, bracket, tol)?;
    let mut summary = format!("alpha* = {:.9}\n", b.alpha);
    if let Some(case) = &b.case {
        let _ = writeln!(summary, "{case:?}");
    }
    Ok(Artifact {
        csv: csv_of(|w| connections::write_bifurcation_csv(std::slice::from_ref(&b), w)),
        summary,
    })
}

fn returnmap(cfg: &RunConfig) -> Result<Artifact, Failure> {
    let p = cfg.point()?;
    let o = &cfg.options;
    if o.n < 2 {
        return Err(Failure::Config("n must be at least 2".into()));
    }
    let s0 = match o.seed {
        Some(s) => State::from(s),
        None => {
            let orbit = SliceContext::standard(&p)?.orbit(OrbitRole::GammaO, p.mu)?;
            manifolds::FloquetBundle::new(&orbit, OrbitManifold::Unstable)?.seed_point(&p, 0.0, o.offset)?
        }
    };
    let seq = orbits::collect_returns_skipping(&p, &s0, &SectionMap::y_zero(), o.n, o.skip)?;
    let changes = orbits::slope_sign_changes(&seq.binned_envelope(20));
    let summary = format!(
        "{} returns after {} transient, slope sign changes over 20 bins: {changes}\n",
        seq.raw.len(),
        o.skip
    );
    Ok(Artifact {
        csv: csv_of(|w| seq.write_csv(w)),
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_rejected() {
        let mut c = RunConfig::default();
        assert!(c.set("resolution", "3").is_err());
        assert!(c.apply_file("alpha = 0.5\nbogus = 1\n").is_err());
    }

    #[test]
    fn file_then_env_then_flags() {
        let mut env = BTreeMap::new();
        env.insert("FLIPSCOPE_MU".to_string(), "-0.002".to_string());
        env.insert("FLIPSCOPE_N".to_string(), "40".to_string());
        let mut flags = Flags::default();
        flags.put("n", Some(50));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "# slice\nalpha = 0.4\nmu = 0.1\nn-alpha = 7\n").unwrap();
        let c = build_config(Some(path), &env, &flags).unwrap();
        assert_eq!(c.alpha, Some(0.4));
        assert_eq!(c.mu, Some(-0.002));
        assert_eq!(c.options.n_alpha, 7);
        assert_eq!(c.options.n, 50);
    }

    #[test]
    fn alpha_and_mu_have_no_defaults() {
        let c = RunConfig::default();
        assert!(c.point().is_err());
        let mut c = c;
        c.set("alpha", "0.5").unwrap();
        assert!(c.point().is_err());
        c.set("mu", "0").unwrap();
        let p = c.point().unwrap();
        assert_eq!(p, Params::reference(0.5, 0.0));
    }

    #[test]
    fn unknown_env_variable_rejected() {
        let mut env = BTreeMap::new();
        env.insert("FLIPSCOPE_COLOUR".to_string(), "red".to_string());
        assert!(RunConfig::default().apply_env(&env).is_err());
    }

    #[test]
    fn every_key_is_settable() {
        for k in KEYS {
            let v = match *k {
                "out" | "owner" | "stability" | "role" | "quantity" | "intersect" | "detectors" => "x",
                "seed" => "0,0,0",
                "n_alpha" | "n_mu" | "n" | "skip" | "seeds" | "workers" => "3",
                _ => "0.5",
            };
            RunConfig::default().set(k, v).unwrap_or_else(|e| panic!("{k}: {e}"));
        }
    }
}
