//! Command-line front end.
//!
//! Every command reads a JSON config (`--config`) or a named preset
//! (`--preset`), writes CSV artifacts into `--out`, and finishes by writing
//! `manifest.json` listing those artifacts. Configs carry `"version": 1` and
//! reject unknown keys.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

use crate::covariance::{matched_reaction_kappa, practical_range, CovarianceSpec, Family, KernelSpec};
use crate::error::{Error, Result};
use crate::estimation::{
    fit, mc_study, simulate_observations, FitResult, ModelParams, Start, StudyConfig, StudySummary,
};
use crate::fields::{
    self, presets, third_fractions, Boundary, Diffusivity, DriftSpec, Grid, GridField, OperatorSpec, ReactionSpec,
    SimConfig,
};
use crate::output::{fmt_f64, CsvWriter, RunManifest};
use crate::particles::{exact_gaussian_transition, init, step_euler, InitialDistribution, LevyParams, ParticleSystem};
use crate::pointprocess::{count, PointPattern, Window};
use crate::rng::stream;
use clap::{Args, Parser, Subcommand};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Schema version accepted in config files.
pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "mechspde", version, about = "Particle, SPDE-field, covariance and pseudo-likelihood computations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Covariance curves as CSV (`h,family,value`).
    Covariance(CommonArgs),
    /// Field snapshots of the stochastic reaction–dispersal equation.
    SimulateField(CommonArgs),
    /// Particle patterns and window counts.
    SimulateParticles(CommonArgs),
    /// One simulated dataset fitted in both observation modes.
    Estimate(CommonArgs),
    /// Monte-Carlo estimation study.
    McStudy(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Master seed; overrides the config value.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Built-in configuration.
    #[arg(long)]
    pub preset: Option<String>,
    /// Replicates (mc-study only); overrides the config value.
    #[arg(long)]
    pub reps: Option<usize>,
}

/// Lags `h` at which curves are tabulated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum LagGrid {
    LogSpaced { min: f64, max: f64, n: usize },
    Linear { min: f64, max: f64, n: usize },
    List { values: Vec<f64> },
}

impl LagGrid {
    pub fn values(&self) -> Result<Vec<f64>> {
        let check = |min: f64, max: f64, n: usize| {
            if !(min > 0.0 && max > min && n >= 2) {
                return Err(Error::Config(format!("lag grid needs 0 < min < max and n ≥ 2, got ({min}, {max}, {n})")));
            }
            Ok(())
        };
        match self {
            LagGrid::LogSpaced { min, max, n } => {
                check(*min, *max, *n)?;
                let (a, b) = (min.ln(), max.ln());
                Ok((0..*n).map(|i| (a + (b - a) * i as f64 / (*n - 1) as f64).exp()).collect())
            }
            LagGrid::Linear { min, max, n } => {
                check(*min, *max, *n)?;
                Ok((0..*n).map(|i| min + (max - min) * i as f64 / (*n - 1) as f64).collect())
            }
            LagGrid::List { values } => {
                if values.is_empty() || values.iter().any(|h| !(h.is_finite() && *h >= 0.0)) {
                    return Err(Error::Config("lag list must be non-empty with finite non-negative lags".into()));
                }
                Ok(values.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedSpec {
    /// Label written in the `family` column and the file name.
    pub name: String,
    pub spec: CovarianceSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovarianceConfig {
    pub version: u32,
    pub specs: Vec<NamedSpec>,
    pub lags: LagGrid,
    /// When set, the lag at which each curve first falls to this level is
    /// recorded in the manifest.
    #[serde(default)]
    pub range_level: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum DiffusivityConfig {
    Constant { value: f64 },
    GaussianDip { d0: f64, d1: f64, sigma_d: f64 },
}

impl DiffusivityConfig {
    fn build(&self) -> Diffusivity {
        match *self {
            DiffusivityConfig::Constant { value } => Diffusivity::Constant(value),
            DiffusivityConfig::GaussianDip { d0, d1, sigma_d } => Diffusivity::GaussianDip { d0, d1, sigma_d },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum OperatorConfig {
    None,
    Laplacian { diffusivity: f64 },
    FokkerPlanck { diffusivity: DiffusivityConfig },
    Fickian { diffusivity: DiffusivityConfig },
    FractionalSpectral { alpha: f64, gamma: f64 },
    KernelConvolution { dispersal: f64, kernel: KernelSpec },
}

impl OperatorConfig {
    fn build(&self) -> Option<OperatorSpec> {
        Some(match self {
            OperatorConfig::None => return None,
            OperatorConfig::Laplacian { diffusivity } => OperatorSpec::Laplacian { diffusivity: *diffusivity },
            OperatorConfig::FokkerPlanck { diffusivity } => OperatorSpec::FokkerPlanck(diffusivity.build()),
            OperatorConfig::Fickian { diffusivity } => OperatorSpec::Fickian(diffusivity.build()),
            OperatorConfig::FractionalSpectral { alpha, gamma } => {
                OperatorSpec::FractionalSpectral { alpha: *alpha, gamma: *gamma }
            }
            OperatorConfig::KernelConvolution { dispersal, kernel } => {
                OperatorSpec::KernelConvolution { dispersal: *dispersal, kernel: *kernel }
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum DriftConfig {
    None,
    Constant { b: Vec<f64> },
    Swirl,
}

impl DriftConfig {
    fn build(&self) -> DriftSpec {
        match self {
            DriftConfig::None => DriftSpec::None,
            DriftConfig::Constant { b } => DriftSpec::Constant(b.clone()),
            DriftConfig::Swirl => DriftSpec::Swirl,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    pub version: u32,
    pub grid: Grid,
    pub operator: OperatorConfig,
    pub reaction: ReactionSpec,
    pub drift: DriftConfig,
    pub sigma_noise: f64,
    pub bc: Boundary,
    /// `null` selects the largest stable step dividing `t_end`.
    pub dt: Option<f64>,
    pub t_end: f64,
    pub snapshot_times: Vec<f64>,
    /// Constant initial value.
    pub initial_value: f64,
    pub seed: u64,
}

impl FieldConfig {
    fn build(&self) -> Result<(SimConfig, GridField)> {
        self.grid.validate()?;
        let mut cfg = SimConfig {
            grid: self.grid,
            operator: self.operator.build(),
            reaction: self.reaction,
            drift: self.drift.build(),
            sigma_noise: self.sigma_noise,
            bc: self.bc,
            dt: 1.0,
            t_end: self.t_end,
            snapshot_times: self.snapshot_times.clone(),
            seed: self.seed,
        };
        cfg.dt = match self.dt {
            Some(dt) => dt,
            None => presets::largest_dividing_dt(&cfg)?,
        };
        cfg.validate()?;
        Ok((cfg, GridField::constant(self.grid, self.initial_value)))
    }

    fn from_sim(cfg: &SimConfig, operator: OperatorConfig, drift: DriftConfig, initial_value: f64) -> Self {
        Self {
            version: CONFIG_VERSION,
            grid: cfg.grid,
            operator,
            reaction: cfg.reaction,
            drift,
            sigma_noise: cfg.sigma_noise,
            bc: cfg.bc,
            dt: Some(cfg.dt),
            t_end: cfg.t_end,
            snapshot_times: cfg.snapshot_times.clone(),
            initial_value,
            seed: cfg.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticlesConfig {
    pub version: u32,
    pub theta: ModelParams,
    pub eta0: f64,
    /// Particles start uniformly in the disc of this radius around 0.
    pub release_radius: f64,
    /// Stability index; 2 gives Brownian dispersal.
    pub alpha: f64,
    /// Euler step; `null` uses exact Gaussian transitions (α = 2 only).
    pub euler_dt: Option<f64>,
    pub times: Vec<f64>,
    pub windows: Vec<Window>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    pub version: u32,
    pub study: StudyConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McStudyConfig {
    pub version: u32,
    pub study: StudyConfig,
    pub reps: usize,
    pub seed: u64,
}

fn check_version(v: u32) -> Result<()> {
    if v != CONFIG_VERSION {
        return Err(Error::Config(format!("unsupported config version {v}, expected {CONFIG_VERSION}")));
    }
    Ok(())
}

/// Exit code for an error: 2 for configuration problems, 3 for numerical failures.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Domain(_) | Error::Json(_) | Error::Io(_) => 2,
        Error::Quadrature { .. } | Error::BlowUp { .. } | Error::NonConvergence(_) | Error::BoundViolated { .. } => 3,
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(manifest) => {
            for f in &manifest.outputs {
                println!("{f}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Runs a parsed command and returns its manifest.
pub fn execute(cmd: &Command) -> Result<RunManifest> {
    let start = Instant::now();
    let (name, args) = match cmd {
        Command::Covariance(a) => ("covariance", a),
        Command::SimulateField(a) => ("simulate-field", a),
        Command::SimulateParticles(a) => ("simulate-particles", a),
        Command::Estimate(a) => ("estimate", a),
        Command::McStudy(a) => ("mc-study", a),
    };
    if args.reps.is_some() && !matches!(cmd, Command::McStudy(_)) {
        return Err(Error::Config("--reps applies to mc-study only".into()));
    }
    fs::create_dir_all(&args.out)?;
    let mut manifest = match cmd {
        Command::Covariance(a) => {
            if a.seed.is_some() {
                return Err(Error::Config("covariance takes no seed".into()));
            }
            let cfg: CovarianceConfig = load(a, covariance_preset)?;
            check_version(cfg.version)?;
            cmd_covariance(&cfg, &a.out)?
        }
        Command::SimulateField(a) => {
            let mut cfg: FieldConfig = load(a, field_preset)?;
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
            check_version(cfg.version)?;
            cmd_simulate_field(&cfg, &a.out)?
        }
        Command::SimulateParticles(a) => {
            let mut cfg: ParticlesConfig = load(a, particles_preset)?;
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
            check_version(cfg.version)?;
            cmd_simulate_particles(&cfg, &a.out)?
        }
        Command::Estimate(a) => {
            let mut cfg: EstimateConfig = load(a, estimate_preset)?;
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
            check_version(cfg.version)?;
            cmd_estimate(&cfg, &a.out)?
        }
        Command::McStudy(a) => {
            let mut cfg: McStudyConfig = load(a, mc_study_preset)?;
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
            if let Some(r) = a.reps {
                cfg.reps = r;
            }
            check_version(cfg.version)?;
            cmd_mc_study(&cfg, &a.out)?
        }
    };
    manifest.command = name.into();
    manifest.wall_time_s = start.elapsed().as_secs_f64();
    manifest.write_atomic(&args.out)?;
    Ok(manifest)
}

fn load<C: DeserializeOwned>(args: &CommonArgs, preset: fn(&str) -> Result<C>) -> Result<C> {
    match (&args.config, &args.preset) {
        (Some(_), Some(_)) => Err(Error::Config("give either --config or --preset, not both".into())),
        (None, None) => Err(Error::Config("one of --config or --preset is required".into())),
        (None, Some(p)) => preset(p),
        (Some(path), None) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("config {}: {e}", path.display())))
        }
    }
}

fn unknown_preset<T>(name: &str, known: &[&str]) -> Result<T> {
    Err(Error::Config(format!("unknown preset `{name}` (known: {})", known.join(", "))))
}

fn manifest<C: Serialize>(
    cfg: &C,
    seed: Option<u64>,
    outputs: Vec<String>,
    metadata: serde_json::Value,
) -> Result<RunManifest> {
    Ok(RunManifest {
        command: String::new(),
        config: serde_json::to_value(cfg)?,
        master_seed: seed,
        version: env!("CARGO_PKG_VERSION").into(),
        wall_time_s: 0.0,
        outputs,
        metadata,
    })
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Damped Laplacian (κ = 1) against the fractional Laplacian with linear
/// reaction, d = 2, α = 1, κ of the latter matched at level 0.05.
pub fn covariance_preset(name: &str) -> Result<CovarianceConfig> {
    match name {
        "fig1" => {
            let kappa_m = matched_reaction_kappa(1.0, 0.05)?;
            Ok(CovarianceConfig {
                version: CONFIG_VERSION,
                specs: vec![
                    NamedSpec {
                        name: "damped_laplacian".into(),
                        spec: CovarianceSpec { family: Family::DampedFractional { alpha: 1.0 }, kappa: 1.0, d: 2 },
                    },
                    NamedSpec {
                        name: "fractional_reaction".into(),
                        spec: CovarianceSpec {
                            family: Family::FractionalReaction { alpha: 1.0 },
                            kappa: kappa_m,
                            d: 2,
                        },
                    },
                ],
                lags: LagGrid::LogSpaced { min: 0.01, max: 10.0, n: 200 },
                range_level: Some(0.05),
            })
        }
        _ => unknown_preset(name, &["fig1"]),
    }
}

pub fn cmd_covariance(cfg: &CovarianceConfig, out: &Path) -> Result<RunManifest> {
    if cfg.specs.is_empty() {
        return Err(Error::Config("covariance config lists no specs".into()));
    }
    let lags = cfg.lags.values()?;
    let mut names = std::collections::BTreeSet::new();
    for s in &cfg.specs {
        s.spec.validate()?;
        if s.name.is_empty() || !s.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return Err(Error::Config(format!("spec name `{}` must be non-empty [A-Za-z0-9_-]", s.name)));
        }
        if !names.insert(&s.name) {
            return Err(Error::Config(format!("duplicate spec name `{}`", s.name)));
        }
    }
    let mut outputs = Vec::new();
    let mut meta = serde_json::Map::new();
    for s in &cfg.specs {
        let path = out.join(format!("covariance_{}.csv", s.name));
        let mut w = CsvWriter::create(&path, &["h", "family", "value"])?;
        for &h in &lags {
            w.row(&[fmt_f64(h), s.name.clone(), fmt_f64(s.spec.covariance(h)?)])?;
        }
        outputs.push(file_name(&w.finish()?));
        let mut entry = serde_json::json!({ "nugget": s.spec.nugget() });
        if let Some(level) = cfg.range_level {
            let (lo, hi) = (lags[0].max(1e-6), *lags.last().unwrap());
            let r = practical_range(|h| s.spec.covariance(h), level, lo, hi)?;
            entry["practical_range"] = serde_json::json!(r);
        }
        meta.insert(s.name.clone(), entry);
    }
    manifest(cfg, None, outputs, serde_json::Value::Object(meta))
}

/// `fig2`, `fig2-nodrift`, `fig4`, `figB6-fp`, `figB6-fick`.
pub fn field_preset(name: &str) -> Result<FieldConfig> {
    let seed = 0;
    let b6 = DiffusivityConfig::GaussianDip { d0: 1e-3, d1: 1e-1, sigma_d: 0.25 };
    match name {
        "fig2" | "fig2-nodrift" => {
            let drift = name == "fig2";
            let (c, _) = presets::fig2(seed, drift)?;
            let d = if drift { DriftConfig::Swirl } else { DriftConfig::None };
            Ok(FieldConfig::from_sim(&c, OperatorConfig::Laplacian { diffusivity: 0.05 }, d, 0.0))
        }
        "fig4" => {
            let (c, u0) = presets::fig4(seed, 0.1)?;
            Ok(FieldConfig::from_sim(
                &c,
                OperatorConfig::Laplacian { diffusivity: 0.1 },
                DriftConfig::None,
                u0.values[0],
            ))
        }
        "figB6-fp" | "figB6-fick" => {
            let fp = name == "figB6-fp";
            let (c, _) = presets::fig_b6(seed, fp)?;
            let op = if fp {
                OperatorConfig::FokkerPlanck { diffusivity: b6 }
            } else {
                OperatorConfig::Fickian { diffusivity: b6 }
            };
            Ok(FieldConfig::from_sim(&c, op, DriftConfig::None, 0.0))
        }
        _ => unknown_preset(name, &["fig2", "fig2-nodrift", "fig4", "figB6-fp", "figB6-fick"]),
    }
}

pub fn cmd_simulate_field(cfg: &FieldConfig, out: &Path) -> Result<RunManifest> {
    let (sim, u0) = cfg.build()?;
    let snaps = fields::simulate(&sim, &u0)?;
    let d = sim.grid.d;
    let header: &[&str] = if d == 2 { &["x1", "x2", "t", "value"] } else { &["x", "t", "value"] };
    let mut outputs = Vec::new();
    let mut stats = Vec::new();
    for (k, snap) in snaps.iter().enumerate() {
        let mut w = CsvWriter::create(out.join(format!("snapshot_{k:03}.csv")), header)?;
        let t = fmt_f64(snap.time);
        for (idx, &v) in snap.values.iter().enumerate() {
            let p = sim.grid.point(idx);
            let mut row: Vec<String> = p[..d].iter().map(|c| fmt_f64(*c)).collect();
            row.push(t.clone());
            row.push(fmt_f64(v));
            w.row(&row)?;
        }
        outputs.push(file_name(&w.finish()?));
        let mut s = serde_json::json!({ "t": snap.time, "mass": snap.mass(), "min": snap.min(), "max": snap.max() });
        if let ReactionSpec::Bistable { k, .. } = sim.reaction {
            s["third_fractions"] = serde_json::json!(third_fractions(snap, k));
        }
        stats.push(s);
    }
    let meta = serde_json::json!({ "dt": sim.dt, "snapshots": stats });
    manifest(cfg, Some(cfg.seed), outputs, meta)
}

/// `fig3`: B = (0.3, 0.5), σ = 0.3, 1/κ² = 3, η₀ = 10⁴, times 1, 3, 6.
pub fn particles_preset(name: &str) -> Result<ParticlesConfig> {
    match name {
        "fig3" => Ok(ParticlesConfig {
            version: CONFIG_VERSION,
            theta: ModelParams::table2(),
            eta0: 1e4,
            release_radius: 0.05,
            alpha: 2.0,
            euler_dt: None,
            times: vec![1.0, 3.0, 6.0],
            windows: Window::table2().to_vec(),
            seed: 0,
        }),
        _ => unknown_preset(name, &["fig3"]),
    }
}

pub fn cmd_simulate_particles(cfg: &ParticlesConfig, out: &Path) -> Result<RunManifest> {
    if cfg.times.is_empty() || cfg.times.windows(2).any(|w| !(w[1] > w[0])) || !(cfg.times[0] > 0.0) {
        return Err(Error::Config("particle times must be positive and strictly increasing".into()));
    }
    for w in &cfg.windows {
        w.validate()?;
    }
    let th = cfg.theta;
    let p0 = InitialDistribution::UniformDisc { center: vec![0.0, 0.0], radius: cfg.release_radius };
    let params = LevyParams { alpha: cfg.alpha, ..LevyParams::gaussian(&th, cfg.eta0, p0) };
    let exact = match cfg.euler_dt {
        None if cfg.alpha == 2.0 => true,
        None => return Err(Error::Config("euler_dt is required when alpha < 2".into())),
        Some(dt) if dt > 0.0 => false,
        Some(dt) => return Err(Error::Config(format!("euler_dt must be positive, got {dt}"))),
    };
    let mut rng = stream(cfg.seed, 0);
    let mut sys = init(&params, &mut rng)?;
    let n0 = sys.len();
    let mut outputs = Vec::new();
    let mut counts = CsvWriter::create(out.join("counts.csv"), &["window_id", "t", "count"])?;
    let mut alive = Vec::new();
    for (k, &t) in cfg.times.iter().enumerate() {
        advance(&mut sys, t, &params, exact, cfg.euler_dt, &mut rng)?;
        outputs.push(file_name(&sys.write_csv(&out.join(format!("pattern_{k:03}.csv")))?));
        let pat = PointPattern::new(sys.alive_positions(), t, None)?;
        for (j, w) in cfg.windows.iter().enumerate() {
            counts.row(&[j.to_string(), fmt_f64(t), count(&pat, w).to_string()])?;
        }
        alive.push(serde_json::json!({
            "t": t,
            "alive": sys.alive_count(),
            "fraction": if n0 > 0 { sys.alive_count() as f64 / n0 as f64 } else { 0.0 },
            "expected_fraction": (-th.kappa * th.kappa * t).exp(),
        }));
    }
    outputs.push(file_name(&counts.finish()?));
    manifest(cfg, Some(cfg.seed), outputs, serde_json::json!({ "initial_particles": n0, "alive": alive }))
}

fn advance(
    sys: &mut ParticleSystem,
    t: f64,
    params: &LevyParams,
    exact: bool,
    euler_dt: Option<f64>,
    rng: &mut crate::rng::ChaCha8Rng,
) -> Result<()> {
    if exact {
        return exact_gaussian_transition(sys, t, params, rng);
    }
    let dt = euler_dt.unwrap_or(f64::NAN);
    while sys.t < t - 1e-12 {
        step_euler(sys, dt.min(t - sys.t), params, rng)?;
    }
    sys.t = t;
    Ok(())
}

fn study_preset(name: &str) -> Result<StudyConfig> {
    match name {
        "table2" => Ok(StudyConfig::table2()),
        _ => unknown_preset(name, &["table2"]),
    }
}

/// `table2`.
pub fn estimate_preset(name: &str) -> Result<EstimateConfig> {
    Ok(EstimateConfig { version: CONFIG_VERSION, study: study_preset(name)?, seed: 0 })
}

/// `table2` with 100 replicates.
pub fn mc_study_preset(name: &str) -> Result<McStudyConfig> {
    Ok(McStudyConfig { version: CONFIG_VERSION, study: study_preset(name)?, reps: 100, seed: 0 })
}

const PARAMS: [(&str, fn(&ModelParams) -> f64); 4] =
    [("B1", |p| p.b1), ("B2", |p| p.b2), ("sigma", |p| p.sigma), ("inv_kappa2", |p| p.mean_deposition_time())];

pub fn cmd_estimate(cfg: &EstimateConfig, out: &Path) -> Result<RunManifest> {
    let study = &cfg.study;
    study.validate()?;
    let mut rng = stream(cfg.seed, 0);
    let obs = simulate_observations(study, &mut rng)?;
    let start = Start::Multistart { lhs: study.lhs_starts, seed: cfg.seed };
    let loc = fit(&obs, &study.bounds, &start, study.eta0, &study.fit)?;
    let cnt = fit(&obs.to_counts(), &study.bounds, &start, study.eta0, &study.fit)?;

    let mut outputs = Vec::new();
    let mut w = CsvWriter::create(out.join("counts.csv"), &["window_id", "t", "count"])?;
    for (j, r) in obs.records.iter().enumerate() {
        w.row(&[j.to_string(), fmt_f64(r.t), r.count.to_string()])?;
    }
    outputs.push(file_name(&w.finish()?));
    let mut w = CsvWriter::create(out.join("estimates.csv"), &["param", "mode", "estimate", "truth"])?;
    for (mode, f) in [("locations", &loc), ("counts", &cnt)] {
        for (name, pick) in PARAMS {
            w.row(&[name.into(), mode.into(), fmt_f64(pick(&f.params)), fmt_f64(pick(&study.theta))])?;
        }
    }
    outputs.push(file_name(&w.finish()?));
    let summary = |f: &FitResult| serde_json::json!({ "loglik": f.loglik, "evaluations": f.evaluations, "converged": f.converged, "starts": f.starts });
    manifest(cfg, Some(cfg.seed), outputs, serde_json::json!({ "locations": summary(&loc), "counts": summary(&cnt) }))
}

pub fn cmd_mc_study(cfg: &McStudyConfig, out: &Path) -> Result<RunManifest> {
    let s: StudySummary = mc_study(&cfg.study, cfg.reps, cfg.seed)?;
    let mut outputs = Vec::new();
    let mut w = CsvWriter::create(out.join("summary.csv"), &["param", "mode", "mean", "sd", "reps", "excluded"])?;
    for r in &s.rows {
        w.row(&[
            r.param.clone(),
            r.mode.clone(),
            fmt_f64(r.mean),
            fmt_f64(r.sd),
            r.reps.to_string(),
            r.excluded.to_string(),
        ])?;
    }
    outputs.push(file_name(&w.finish()?));
    let mut w = CsvWriter::create(
        out.join("replicates.csv"),
        &["rep", "mode", "B1", "B2", "sigma", "inv_kappa2", "loglik", "converged"],
    )?;
    for r in &s.replicates {
        for (mode, f) in [("locations", &r.locations), ("counts", &r.counts)] {
            if let Some(f) = f {
                let mut row = vec![r.rep.to_string(), mode.into()];
                row.extend(PARAMS.iter().map(|(_, pick)| fmt_f64(pick(&f.params))));
                row.push(fmt_f64(f.loglik));
                row.push(f.converged.to_string());
                w.row(&row)?;
            }
        }
    }
    outputs.push(file_name(&w.finish()?));
    let fails = s.replicates.iter().filter(|r| r.locations.is_none() || r.counts.is_none()).count();
    manifest(cfg, Some(cfg.seed), outputs, serde_json::json!({ "replicates_with_failed_fit": fails }))
}
