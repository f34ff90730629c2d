//! Command-line driver: JSON config plus flag overrides, CSV tables with a
//! `#` header line holding the resolved config.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::approx::{approx_scan, ApproxRow, SCAN_CUTOFF};
use crate::error::Error;
use crate::hilbert::FockConfig;
use crate::lindblad::{run_noisy_protocol, NoiseKind, NoiseModel, DEFAULT_DT};
use crate::metrics::{fmt_sig, p_density_adaptive, squeezing_db, MetricsRecord};
use crate::optimizer::{cutoff_for_steps, optimize, Objective, OptimizeReport, DEFAULT_BUDGET, MAX_STEPS, MIN_BUDGET};
use crate::protocol::{InteractionSchedule, ProtocolResult};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Rate at which the fisher command dumps example densities.
pub const DUMP_GAMMA_T: f64 = 7e-2;
const DUMP_KINDS: [NoiseKind; 2] = [NoiseKind::BosonLoss, NoiseKind::QubitDecay];

#[derive(Debug, Parser)]
#[command(name = "rabi-squeeze", version, about = "Squeezed vacuum from sequential Rabi interactions")]
struct Args {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration; omitted keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: number of processors).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output CSV path (default: standard output).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Optimize one schedule and report its metrics.
    Optimize,
    /// Optimized squeezing against the number of steps.
    Fig2,
    /// Best squeezing over N under each noise channel.
    Fig3,
    /// Fisher information of an optimized schedule under noise.
    Fisher,
    /// Coherent-lattice approximation scan.
    ApproxScan,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub kind: NoiseKind,
    #[serde(rename = "gamma_T")]
    pub gamma_t: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { kind: NoiseKind::None, gamma_t: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    #[serde(rename = "N")]
    pub n_steps: usize,
    /// Fock cutoff; `None` picks one per N.
    pub cutoff: Option<usize>,
    pub w: f64,
    pub noise: NoiseConfig,
    pub postselect: bool,
    pub seed: u64,
    pub dt: f64,
    pub budget: usize,
    pub output_path: Option<PathBuf>,
    #[serde(rename = "N_max")]
    pub n_max: usize,
    #[serde(rename = "N_range")]
    pub n_range: Vec<usize>,
    pub noise_kinds: Vec<NoiseKind>,
    pub gamma_grid: Vec<f64>,
    pub d_alpha_grid: Vec<f64>,
    pub delta_db_grid: Vec<f64>,
    /// Directory of optimized schedules shared between runs.
    pub cache_dir: Option<PathBuf>,
    pub dump_densities: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_steps: 3,
            cutoff: None,
            w: 0.0,
            noise: NoiseConfig::default(),
            postselect: false,
            seed: 1,
            dt: DEFAULT_DT,
            budget: DEFAULT_BUDGET,
            output_path: None,
            n_max: 5,
            n_range: (1..=5).collect(),
            noise_kinds: NoiseKind::ALL.to_vec(),
            gamma_grid: vec![1e-3, 1e-2, 1e-1],
            d_alpha_grid: (1..=12).map(|k| 0.25 * k as f64).collect(),
            delta_db_grid: (1..=10).map(|k| 2.0 * k as f64).collect(),
            cache_dir: None,
            dump_densities: false,
        }
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}

fn check_steps(n: usize) -> crate::Result<()> {
    if !(1..=MAX_STEPS).contains(&n) {
        return Err(invalid(format!("N = {n} must lie in [1, {MAX_STEPS}]")));
    }
    Ok(())
}

fn check_grid(name: &str, grid: &[f64], positive: bool) -> crate::Result<()> {
    if grid.is_empty() {
        return Err(invalid(format!("{name} is empty")));
    }
    let bad = grid.iter().find(|x| !x.is_finite() || **x < 0.0 || (positive && **x == 0.0));
    if let Some(x) = bad {
        return Err(invalid(format!("{name} entry {x} is out of range")));
    }
    Ok(())
}

impl RunConfig {
    pub fn from_json(text: &str) -> crate::Result<Self> {
        serde_json::from_str(text).map_err(|e| invalid(format!("config: {e}")))
    }

    /// Checks every field the command reads.
    pub fn validate(&self, cmd: Command) -> crate::Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid(format!("dt = {} must be positive", self.dt)));
        }
        if self.budget < MIN_BUDGET {
            return Err(invalid(format!("budget {} is below the minimum of {MIN_BUDGET}", self.budget)));
        }
        if let Some(c) = self.cutoff {
            FockConfig::with_cutoff(c)?;
        }
        if self.dump_densities && self.output_path.is_none() {
            return Err(invalid("dump_densities needs an output path"));
        }
        match cmd {
            Command::Optimize => {
                check_steps(self.n_steps)?;
                self.objective()?;
                NoiseModel::new(self.noise.kind, self.noise.gamma_t)?;
            }
            Command::Fig2 => check_steps(self.n_max)?,
            Command::Fig3 | Command::Fisher => {
                if cmd == Command::Fig3 {
                    if self.n_range.is_empty() {
                        return Err(invalid("N_range is empty"));
                    }
                    self.n_range.iter().try_for_each(|&n| check_steps(n))?;
                } else {
                    check_steps(self.n_steps)?;
                }
                if self.noise_kinds.is_empty() {
                    return Err(invalid("noise_kinds is empty"));
                }
                if self.noise_kinds.contains(&NoiseKind::None) {
                    return Err(invalid("noise_kinds lists \"none\""));
                }
                check_grid("gamma_grid", &self.gamma_grid, false)?;
            }
            Command::ApproxScan => {
                check_grid("d_alpha_grid", &self.d_alpha_grid, true)?;
                check_grid("delta_db_grid", &self.delta_db_grid, true)?;
            }
        }
        Ok(())
    }

    pub fn objective(&self) -> crate::Result<Objective> {
        if self.w == 0.0 {
            Ok(Objective::squeeze_only(self.postselect))
        } else {
            Objective::weighted(self.w, self.postselect)
        }
    }

    pub fn fock(&self, n_steps: usize) -> crate::Result<FockConfig> {
        FockConfig::with_cutoff(self.cutoff.unwrap_or_else(|| cutoff_for_steps(n_steps)))
    }

    fn header(&self, cmd: Command) -> String {
        let cmd = serde_json::to_value(cmd).expect("command serializes");
        let cfg = serde_json::to_string(self).expect("config serializes");
        format!("# rabi-squeeze {} config: {cfg}", cmd.as_str().unwrap_or_default())
    }
}

/// Optimized schedules keyed by a hash of everything that determines them.
/// Kept in memory and, when a directory is given, on disk as JSON.
#[derive(Debug, Default)]
pub struct ScheduleCache {
    dir: Option<PathBuf>,
    mem: Mutex<HashMap<String, OptimizeReport>>,
}

impl ScheduleCache {
    pub fn new(dir: Option<PathBuf>) -> Self {
        Self { dir, mem: Mutex::default() }
    }

    pub fn key(n_steps: usize, obj: &Objective, seed: u64, cutoff: usize, budget: usize) -> String {
        let desc = format!(
            "N={n_steps};w={:?};target={:?};postselected={};seed={seed};cutoff={cutoff};budget={budget}",
            obj.w, obj.target, obj.postselected
        );
        hex::encode(Sha256::digest(desc.as_bytes()))
    }

    pub fn optimized(
        &self,
        n_steps: usize,
        obj: &Objective,
        seed: u64,
        cfg: &FockConfig,
        budget: usize,
    ) -> crate::Result<OptimizeReport> {
        let key = Self::key(n_steps, obj, seed, cfg.cutoff, budget);
        if let Some(r) = self.mem.lock().expect("cache lock").get(&key) {
            return Ok(r.clone());
        }
        let path = self.dir.as_ref().map(|d| d.join(format!("{key}.json")));
        let stored = path
            .as_ref()
            .and_then(|p| std::fs::read_to_string(p).ok())
            .and_then(|t| serde_json::from_str::<OptimizeReport>(&t).ok());
        let report = match stored {
            Some(r) => r,
            None => {
                let r = optimize(n_steps, obj, seed, cfg, budget)?;
                if let (Some(dir), Some(p)) = (&self.dir, &path) {
                    // a failed write only costs a re-optimization later
                    let _ = std::fs::create_dir_all(dir)
                        .and_then(|_| std::fs::write(p, serde_json::to_string(&r).expect("report serializes")));
                }
                r
            }
        };
        self.mem.lock().expect("cache lock").insert(key, report.clone());
        Ok(report)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig2Row {
    #[serde(rename = "N")]
    pub n_steps: usize,
    pub deterministic: MetricsRecord,
    pub postselected: MetricsRecord,
}

impl Fig2Row {
    pub const CSV_HEADER: &'static str = "N,deterministic_db,postselected_db,deterministic_antisqueeze_db,\
postselected_antisqueeze_db,deterministic_fidelity,postselected_fidelity,postselect_prob";

    pub fn csv_row(&self) -> String {
        let (d, p) = (&self.deterministic, &self.postselected);
        let vals = [d.squeeze_db, p.squeeze_db, d.antisqueeze_db, p.antisqueeze_db, d.fidelity, p.fidelity, p.postselect_prob];
        format!("{},{}", self.n_steps, vals.map(fmt_sig).join(","))
    }
}

/// Deterministic and postselected squeeze-only optima for N = 1..n_max.
pub fn fig2_rows(cfg: &RunConfig, cache: &ScheduleCache) -> crate::Result<Vec<Fig2Row>> {
    (1..=cfg.n_max)
        .map(|n| {
            let fock = cfg.fock(n)?;
            let det = cache.optimized(n, &Objective::squeeze_only(false), cfg.seed, &fock, cfg.budget)?;
            let post = cache.optimized(n, &Objective::squeeze_only(true), cfg.seed, &fock, cfg.budget)?;
            Ok(Fig2Row { n_steps: n, deterministic: det.metrics, postselected: post.metrics })
        })
        .collect()
}

/// Cutoff escalations for a noisy run whose state spreads past the cutoff
/// the schedule was optimized at.
const NOISY_WIDENINGS: usize = 2;

/// Noisy run of `s`, retried at 1.5× the cutoff when noise spreads the state
/// into the top Fock levels.
fn run_noisy_widening(s: &InteractionSchedule, m: &NoiseModel, fock: &FockConfig, dt: f64) -> crate::Result<ProtocolResult> {
    let mut fock = *fock;
    for _ in 0..NOISY_WIDENINGS {
        match run_noisy_protocol(s, m, &fock, Some(dt)) {
            Err(Error::Leak { .. }) => fock.cutoff += fock.cutoff / 2,
            other => return other,
        }
    }
    run_noisy_protocol(s, m, &fock, Some(dt))
}

/// Squeezing of one noisy run of `s`: deterministic and postselected.
pub fn noisy_squeezing(s: &InteractionSchedule, m: &NoiseModel, fock: &FockConfig, dt: f64) -> crate::Result<(f64, f64)> {
    let out = run_noisy_widening(s, m, fock, dt)?;
    Ok((squeezing_db(&out.deterministic).0, squeezing_db(&out.postselected).0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig3Row {
    pub noise_type: NoiseKind,
    #[serde(rename = "gamma_T")]
    pub gamma_t: f64,
    /// `(N, deterministic_db, postselected_db)` for every N in the range.
    pub per_n: Vec<(usize, f64, f64)>,
    pub best_n_deterministic: usize,
    pub deterministic_db: f64,
    pub best_n_postselected: usize,
    pub postselected_db: f64,
}

impl Fig3Row {
    pub const CSV_HEADER: &'static str =
        "noise_type,gamma_T,best_N_deterministic,deterministic_db,best_N_postselected,postselected_db";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.noise_type.label(),
            fmt_sig(self.gamma_t),
            self.best_n_deterministic,
            fmt_sig(self.deterministic_db),
            self.best_n_postselected,
            fmt_sig(self.postselected_db)
        )
    }
}

/// First index of the largest value, so ties go to the smaller N.
fn argmax(per_n: &[(usize, f64)]) -> (usize, f64) {
    per_n.iter().skip(1).fold(per_n[0], |best, &(n, v)| if v > best.1 { (n, v) } else { best })
}

/// For every (kind, γT): the best squeezing over N. The postselected value
/// at each N is the better postselected branch of the deterministic and
/// the postselected optimum.
pub fn fig3_rows(cfg: &RunConfig, cache: &ScheduleCache) -> crate::Result<Vec<Fig3Row>> {
    let mut schedules = Vec::new();
    for &n in &cfg.n_range {
        let fock = cfg.fock(n)?;
        let det = cache.optimized(n, &Objective::squeeze_only(false), cfg.seed, &fock, cfg.budget)?;
        let post = cache.optimized(n, &Objective::squeeze_only(true), cfg.seed, &fock, cfg.budget)?;
        schedules.push((n, fock, det.best, post.best));
    }
    let per_point = schedules.len();
    let points: Vec<(NoiseKind, f64, usize)> = cfg
        .noise_kinds
        .iter()
        .flat_map(|&k| cfg.gamma_grid.iter().flat_map(move |&g| (0..per_point).map(move |i| (k, g, i))))
        .collect();
    let runs: Vec<(f64, f64)> = points
        .par_iter()
        .map(|&(kind, g, i)| {
            let (_, fock, det, post) = &schedules[i];
            let m = NoiseModel::new(kind, g)?;
            let (d, pd) = noisy_squeezing(det, &m, fock, cfg.dt)?;
            let (_, pp) = noisy_squeezing(post, &m, fock, cfg.dt)?;
            Ok((d, pd.max(pp)))
        })
        .collect::<crate::Result<_>>()?;
    Ok(points
        .chunks(per_point)
        .zip(runs.chunks(per_point))
        .map(|(pts, vals)| {
            let per_n: Vec<(usize, f64, f64)> =
                pts.iter().zip(vals).map(|(&(_, _, i), &(d, p))| (schedules[i].0, d, p)).collect();
            let det: Vec<(usize, f64)> = per_n.iter().map(|&(n, d, _)| (n, d)).collect();
            let post: Vec<(usize, f64)> = per_n.iter().map(|&(n, _, p)| (n, p)).collect();
            let (best_n_deterministic, deterministic_db) = argmax(&det);
            let (best_n_postselected, postselected_db) = argmax(&post);
            Fig3Row {
                noise_type: pts[0].0,
                gamma_t: pts[0].1,
                per_n,
                best_n_deterministic,
                deterministic_db,
                best_n_postselected,
                postselected_db,
            }
        })
        .collect())
}

/// Metrics of the noisy output of `s` on the requested branch.
pub fn noisy_metrics(
    s: &InteractionSchedule,
    m: &NoiseModel,
    fock: &FockConfig,
    dt: f64,
    postselected: bool,
) -> crate::Result<MetricsRecord> {
    let out = run_noisy_widening(s, m, fock, dt)?;
    MetricsRecord::evaluate(out.branch(postselected), s.n_steps(), m.kind.label(), m.gamma_t, postselected, out.postselect_prob)
}

/// Deterministic-output metrics of the optimized N-step schedule for every
/// (kind, γT).
pub fn fisher_rows(cfg: &RunConfig, cache: &ScheduleCache) -> crate::Result<Vec<MetricsRecord>> {
    let fock = cfg.fock(cfg.n_steps)?;
    let report = cache.optimized(cfg.n_steps, &Objective::squeeze_only(false), cfg.seed, &fock, cfg.budget)?;
    let points: Vec<(NoiseKind, f64)> =
        cfg.noise_kinds.iter().flat_map(|&k| cfg.gamma_grid.iter().map(move |&g| (k, g))).collect();
    points
        .par_iter()
        .map(|&(k, g)| noisy_metrics(&report.best, &NoiseModel::new(k, g)?, &fock, cfg.dt, false))
        .collect()
}

fn density_dumps(cfg: &RunConfig, cache: &ScheduleCache) -> crate::Result<Vec<(NoiseKind, String)>> {
    let fock = cfg.fock(cfg.n_steps)?;
    let report = cache.optimized(cfg.n_steps, &Objective::squeeze_only(false), cfg.seed, &fock, cfg.budget)?;
    DUMP_KINDS
        .iter()
        .map(|&k| {
            let out = run_noisy_widening(&report.best, &NoiseModel::new(k, DUMP_GAMMA_T)?, &fock, cfg.dt)?;
            let grid = p_density_adaptive(&out.deterministic)?;
            let mut text = String::from("p,density\n");
            for (i, v) in grid.values.iter().enumerate() {
                let _ = writeln!(text, "{},{}", fmt_sig(grid.point(i)), fmt_sig(*v));
            }
            Ok((k, text))
        })
        .collect()
}

/// The approximation scan at the configured cutoff, or one that holds
/// 20 dB targets.
pub fn approx_rows(cfg: &RunConfig) -> crate::Result<Vec<ApproxRow>> {
    let fock = FockConfig::with_cutoff(cfg.cutoff.unwrap_or(SCAN_CUTOFF))?;
    approx_scan(&cfg.d_alpha_grid, &cfg.delta_db_grid, &fock)
}

#[derive(Debug, Serialize)]
struct OptimizeOutput<'a> {
    report: &'a OptimizeReport,
    /// Metrics of the optimum under the configured noise.
    noisy_metrics: Option<&'a MetricsRecord>,
}

/// Failure of a CLI run, with its exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(Error),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(e) => write!(f, "numerical failure: {e}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e)
        } else {
            CliError::Config(e.to_string())
        }
    }
}

fn table(header: String, columns: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut out = format!("{header}\n{columns}\n");
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    out
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn with_suffix(path: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}

/// Runs one command and returns the CSV text plus side files to write.
pub fn execute(cmd: Command, cfg: &RunConfig) -> Result<(String, Vec<(PathBuf, String)>), CliError> {
    cfg.validate(cmd)?;
    let cache = ScheduleCache::new(cfg.cache_dir.clone());
    let header = cfg.header(cmd);
    let mut side = Vec::new();
    let csv = match cmd {
        Command::Optimize => {
            let fock = cfg.fock(cfg.n_steps)?;
            let report = cache.optimized(cfg.n_steps, &cfg.objective()?, cfg.seed, &fock, cfg.budget)?;
            let noisy = if cfg.noise.kind == NoiseKind::None {
                None
            } else {
                let m = NoiseModel::new(cfg.noise.kind, cfg.noise.gamma_t)?;
                Some(noisy_metrics(&report.best, &m, &fock, cfg.dt, cfg.postselect)?)
            };
            let row = noisy.as_ref().unwrap_or(&report.metrics).csv_row();
            if let Some(out) = &cfg.output_path {
                let json = OptimizeOutput { report: &report, noisy_metrics: noisy.as_ref() };
                side.push((
                    out.with_extension("json"),
                    serde_json::to_string_pretty(&json).expect("report serializes") + "\n",
                ));
            }
            table(header, MetricsRecord::CSV_HEADER, [row])
        }
        Command::Fig2 => table(header, Fig2Row::CSV_HEADER, fig2_rows(cfg, &cache)?.iter().map(Fig2Row::csv_row)),
        Command::Fig3 => table(header, Fig3Row::CSV_HEADER, fig3_rows(cfg, &cache)?.iter().map(Fig3Row::csv_row)),
        Command::Fisher => {
            let rows = fisher_rows(cfg, &cache)?;
            if cfg.dump_densities {
                let out = cfg.output_path.as_ref().expect("validated");
                for (k, text) in density_dumps(cfg, &cache)? {
                    side.push((with_suffix(out, &format!("-density-{}", k.label()), "csv"), text));
                }
            }
            table(header, MetricsRecord::CSV_HEADER, rows.iter().map(MetricsRecord::csv_row))
        }
        Command::ApproxScan => table(header, ApproxRow::CSV_HEADER, approx_rows(cfg)?.iter().map(ApproxRow::csv_row)),
    };
    Ok((csv, side))
}

fn load_config(args: &Args) -> Result<RunConfig, CliError> {
    let mut cfg = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = &args.out {
        cfg.output_path = Some(o.clone());
    }
    Ok(cfg)
}

fn dispatch(args: Args) -> Result<(), CliError> {
    let cfg = load_config(&args)?;
    let jobs = match args.jobs {
        Some(0) => return Err(CliError::Config("--jobs must be at least 1".into())),
        Some(j) => j,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Io(format!("worker pool: {e}")))?;
    let (csv, side) = pool.install(|| execute(args.command, &cfg))?;
    match &cfg.output_path {
        Some(p) => write_file(p, &csv)?,
        None => print!("{csv}"),
    }
    for (p, text) in side {
        write_file(&p, &text)?;
    }
    Ok(())
}

/// Entry point; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(args) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("rabi-squeeze: {e}");
            e.exit_code()
        }
    }
}
