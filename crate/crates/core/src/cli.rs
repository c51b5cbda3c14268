//! Experiment runner: JSON config in, `<command>-<hash>.csv/json` out.
//!
//! Exit status 2 means the configuration was rejected (nothing is written),
//! 1 a numerical failure, 0 success.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Parser;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::acceptance;
use crate::bloch::{
    self, scan, scan_table, semiclassical_inverse_norm, sigma_grid, CutoffRule, PencilCoefficients,
    ScanMode, ScanPlan, ScanRow, SigmaSampling,
};
use crate::damping::{gcc_infimum, DampingProfile, RayAverageReport};
use crate::decayfit::{fit_exponential, fit_table, verify_power_bound, FitResult, Window};
use crate::error::{invalid, Error, Result};
use crate::evolve::{dissipation_residual, simulate, DecayRecord};
use crate::fields::{make_state, write_snapshot, InputNorms, StateKind, TorusGrid};
use crate::semigroup_lab::{
    block_extension_checks, borichev_tomilov_experiment, gearhart_experiment, lab_table,
    random_dissipative, LabRow,
};
use crate::table::{Cell, Table};

#[derive(Debug, Parser)]
#[command(name = "kgdamp", version, about = "Klein-Gordon damping experiments")]
pub struct Args {
    /// Experiment configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `out` in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for parallel sweeps.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub verbose: bool,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum ExperimentConfig {
    Simulate(SimulateConfig),
    ResolventScan(ScanConfig),
    GccCheck(GccConfig),
    SemiclassicalScan(SemiclassicalConfig),
    SemigroupLab(LabConfig),
    Fit(FitConfig),
    AllAcceptance(AcceptanceConfig),
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub profile: DampingProfile,
    /// Grid points per axis.
    pub grid: usize,
    #[serde(default = "one")]
    pub mass: f64,
    #[serde(default)]
    pub sigma: Option<Vec<f64>>,
    pub initial: StateKind,
    pub etas: Vec<u32>,
    pub t_end: f64,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub stride: Option<usize>,
    /// Also write the final state of every run.
    #[serde(default)]
    pub snapshot: bool,
}

/// Either an explicit list or `count` points from `start` to `stop`.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum Grid1d {
    List(Vec<f64>),
    Range {
        start: f64,
        stop: f64,
        count: usize,
        #[serde(default)]
        log: bool,
    },
}

impl Grid1d {
    pub fn values(&self) -> Result<Vec<f64>> {
        match self {
            Grid1d::List(v) if v.is_empty() => Err(invalid("value list must be non-empty")),
            Grid1d::List(v) => Ok(v.clone()),
            Grid1d::Range { count: 0, .. } => Err(invalid("range count must be positive")),
            Grid1d::Range { start, count: 1, .. } => Ok(vec![*start]),
            Grid1d::Range {
                start,
                stop,
                count,
                log,
            } => {
                if *log && !(*start > 0.0 && *stop > 0.0) {
                    return Err(invalid("log range needs positive end points"));
                }
                Ok((0..*count)
                    .map(|i| {
                        let f = i as f64 / (*count - 1) as f64;
                        if *log {
                            start * (stop / start).powf(f)
                        } else {
                            start + (stop - start) * f
                        }
                    })
                    .collect())
            }
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub profile: DampingProfile,
    #[serde(default = "one")]
    pub mass: f64,
    /// `scalar` or `energy`.
    #[serde(default = "scalar_mode")]
    pub mode: ScanMode,
    pub etas: Vec<f64>,
    pub taus: Grid1d,
    #[serde(default)]
    pub sigma: SigmaSampling,
    #[serde(default)]
    pub cutoff: CutoffRule,
    /// Singular fibers are a numerical failure unless allowed.
    #[serde(default)]
    pub allow_singular: bool,
}

fn scalar_mode() -> ScanMode {
    ScanMode::Scalar
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GccConfig {
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub profile: DampingProfile,
    pub horizons: Vec<f64>,
    #[serde(default = "default_nx")]
    pub n_x: usize,
    #[serde(default = "default_nxi")]
    pub n_xi: usize,
}

fn default_nx() -> usize {
    64
}

fn default_nxi() -> usize {
    32
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemiclassicalConfig {
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub profile: DampingProfile,
    pub h: Vec<f64>,
    pub eps: Vec<f64>,
    #[serde(default)]
    pub sigma: SigmaSampling,
    #[serde(default)]
    pub cutoff: CutoffRule,
    #[serde(default)]
    pub allow_singular: bool,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabConfig {
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub dims: Vec<usize>,
    pub seeds: Vec<u64>,
    pub gap: f64,
    #[serde(default = "one_u32")]
    pub kappa: u32,
    #[serde(default = "half")]
    pub nu: f64,
    #[serde(default = "fifty")]
    pub tau_max: f64,
    #[serde(default = "fifty")]
    pub t_max: f64,
}

fn one_u32() -> u32 {
    1
}

fn half() -> f64 {
    0.5
}

fn fifty() -> f64 {
    50.0
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitKind {
    Exponential,
    PowerBound,
    Both,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// A `simulate` CSV artifact; its JSON sidecar supplies the input norms.
    pub input: PathBuf,
    pub model: FitKind,
    #[serde(default = "default_window")]
    pub window: [f64; 2],
}

fn default_window() -> [f64; 2] {
    [0.1, 1.0]
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcceptanceConfig {
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Subset of criteria to run (all by default).
    #[serde(default)]
    pub criteria: Option<Vec<usize>>,
}

impl ExperimentConfig {
    pub fn command(&self) -> &'static str {
        match self {
            ExperimentConfig::Simulate(_) => "simulate",
            ExperimentConfig::ResolventScan(_) => "resolvent-scan",
            ExperimentConfig::GccCheck(_) => "gcc-check",
            ExperimentConfig::SemiclassicalScan(_) => "semiclassical-scan",
            ExperimentConfig::SemigroupLab(_) => "semigroup-lab",
            ExperimentConfig::Fit(_) => "fit",
            ExperimentConfig::AllAcceptance(_) => "all-acceptance",
        }
    }

    fn out(&self) -> Option<&PathBuf> {
        match self {
            ExperimentConfig::Simulate(c) => c.out.as_ref(),
            ExperimentConfig::ResolventScan(c) => c.out.as_ref(),
            ExperimentConfig::GccCheck(c) => c.out.as_ref(),
            ExperimentConfig::SemiclassicalScan(c) => c.out.as_ref(),
            ExperimentConfig::SemigroupLab(c) => c.out.as_ref(),
            ExperimentConfig::Fit(c) => c.out.as_ref(),
            ExperimentConfig::AllAcceptance(c) => c.out.as_ref(),
        }
    }

    /// Checks that do not need any numerics.
    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64, what: &str| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("{what} must be positive")))
            }
        };
        match self {
            ExperimentConfig::Simulate(c) => {
                positive(c.mass, "mass")?;
                positive(c.t_end, "t_end")?;
                if c.etas.is_empty() || c.etas.contains(&0) {
                    return Err(invalid("etas must be a non-empty list of positive integers"));
                }
                TorusGrid::new(c.profile.dim(), c.grid)?;
            }
            ExperimentConfig::ResolventScan(c) => {
                positive(c.mass, "mass")?;
                if c.etas.is_empty() || c.etas.iter().any(|e| !(*e >= 1.0)) {
                    return Err(invalid("etas must be a non-empty list of values >= 1"));
                }
                if c.mode == ScanMode::Semiclassical {
                    return Err(invalid("use the semiclassical-scan command for that mode"));
                }
                c.taus.values()?;
            }
            ExperimentConfig::GccCheck(c) => {
                if c.horizons.is_empty() {
                    return Err(invalid("horizons must be non-empty"));
                }
                for &t in &c.horizons {
                    positive(t, "horizon")?;
                }
            }
            ExperimentConfig::SemiclassicalScan(c) => {
                if c.h.is_empty() || c.eps.is_empty() {
                    return Err(invalid("h and eps lists must be non-empty"));
                }
                if c.h.iter().chain(&c.eps).any(|x| !(*x > 0.0 && *x <= 1.0)) {
                    return Err(invalid("h and eps must lie in (0, 1]"));
                }
            }
            ExperimentConfig::SemigroupLab(c) => {
                if c.dims.is_empty() || c.seeds.is_empty() || c.dims.contains(&0) {
                    return Err(invalid("dims and seeds must be non-empty, dims positive"));
                }
                if !(c.gap >= 0.0) {
                    return Err(invalid("gap must be non-negative"));
                }
                positive(c.tau_max, "tau_max")?;
                positive(c.t_max, "t_max")?;
            }
            ExperimentConfig::Fit(c) => {
                Window::new(c.window[0], c.window[1])?;
            }
            ExperimentConfig::AllAcceptance(c) => {
                if let Some(ids) = &c.criteria {
                    if ids.is_empty() || ids.iter().any(|i| !(1..=acceptance::CRITERIA).contains(i)) {
                        return Err(invalid("criteria must list ids between 1 and 12"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Hex SHA-256 of the config with keys sorted and the output directory
/// removed, truncated to 16 characters.
pub fn config_hash(value: &serde_json::Value) -> String {
    let mut v = value.clone();
    if let Some(obj) = v.as_object_mut() {
        obj.remove("out");
    }
    // serde_json's map is ordered by key, so this rendering is canonical
    let text = serde_json::to_string(&v).expect("json value serializes");
    let digest = Sha256::digest(text.as_bytes());
    hex::encode(digest)[..16].to_owned()
}

/// Result of one run before it is written.
pub struct Artifacts {
    pub table: Table,
    pub results: serde_json::Value,
    /// Numerical failure to report after writing.
    pub failure: Option<String>,
    /// Extra files (stem relative to the output directory).
    pub snapshots: Vec<(String, crate::fields::FieldState)>,
}

impl Artifacts {
    fn ok(table: Table, results: serde_json::Value) -> Self {
        Artifacts {
            table,
            results,
            failure: None,
            snapshots: Vec::new(),
        }
    }
}

fn atomic_write(dir: &Path, name: &str, body: &[u8]) -> Result<()> {
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(body)?;
    tmp.flush()?;
    tmp.persist(dir.join(name)).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidInput(_) | Error::UnderResolved { .. } | Error::Json(_) => 2,
        _ => 1,
    }
}

/// Parses, validates, runs and writes; returns the process exit status.
pub fn main_with(args: Args) -> i32 {
    if let Some(k) = args.threads {
        if k == 0 {
            eprintln!("config error: --threads must be positive");
            return 2;
        }
        // fails only if a pool already exists, which then serves as is
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    }
    let text = match fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("config error: cannot read {}: {e}", args.config.display());
            return 2;
        }
    };
    let value: serde_json::Value = match serde_json::from_str(&text) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("config error: {e}");
            return 2;
        }
    };
    let config: ExperimentConfig = match serde_json::from_value(value.clone()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return 2;
        }
    };
    if let Err(e) = config.validate() {
        eprintln!("config error: {e}");
        return 2;
    }
    let out = args
        .out
        .clone()
        .or_else(|| config.out().cloned())
        .unwrap_or_else(|| PathBuf::from("."));
    let hash = config_hash(&value);
    let stem = format!("{}-{hash}", config.command());
    if args.verbose {
        eprintln!("running {stem}");
    }
    let artifacts = match execute(&config, args.verbose) {
        Ok(a) => a,
        Err(e) => {
            let code = exit_code(&e);
            let kind = if code == 2 { "config error" } else { "numerical failure" };
            eprintln!("{kind}: {e}");
            return code;
        }
    };
    let written = (|| -> Result<()> {
        fs::create_dir_all(&out)?;
        atomic_write(&out, &format!("{stem}.csv"), artifacts.table.to_csv().as_bytes())?;
        let mut canonical = value.clone();
        if let Some(obj) = canonical.as_object_mut() {
            obj.remove("out");
        }
        let doc = serde_json::json!({
            "command": config.command(),
            "hash": hash,
            "config": canonical,
            "results": artifacts.results,
        });
        atomic_write(&out, &format!("{stem}.json"), serde_json::to_string_pretty(&doc)?.as_bytes())?;
        for (name, state) in &artifacts.snapshots {
            write_snapshot(state, &out, &format!("{stem}-{name}"))?;
        }
        Ok(())
    })();
    if let Err(e) = written {
        eprintln!("cannot write artifacts: {e}");
        return 1;
    }
    if args.verbose {
        eprintln!("wrote {}", out.join(format!("{stem}.csv")).display());
    }
    match artifacts.failure {
        Some(msg) => {
            eprintln!("numerical failure: {msg}");
            1
        }
        None => 0,
    }
}

pub fn execute(config: &ExperimentConfig, verbose: bool) -> Result<Artifacts> {
    match config {
        ExperimentConfig::Simulate(c) => run_simulate(c),
        ExperimentConfig::ResolventScan(c) => run_scan(c),
        ExperimentConfig::GccCheck(c) => run_gcc(c),
        ExperimentConfig::SemiclassicalScan(c) => run_semiclassical(c),
        ExperimentConfig::SemigroupLab(c) => run_lab(c),
        ExperimentConfig::Fit(c) => run_fit(c),
        ExperimentConfig::AllAcceptance(c) => run_acceptance(c, verbose),
    }
}

fn run_simulate(c: &SimulateConfig) -> Result<Artifacts> {
    let dim = c.profile.dim();
    let grid = TorusGrid::new(dim, c.grid)?;
    let sigma = c.sigma.clone().unwrap_or_else(|| vec![0.0; dim]);
    let initial = make_state(grid, &sigma, c.mass, &c.initial)?;
    let mut table = Table::new(["t", "E", "D", "eta"]);
    let mut records = Vec::new();
    let mut snapshots = Vec::new();
    for &eta in &c.etas {
        let sim = simulate(&initial, &c.profile, eta, c.t_end, c.dt, c.stride)?;
        let rec = &sim.record;
        table.rows.extend(rec.to_table().rows);
        let mut meta = rec.metadata();
        meta["dissipation_residual"] = dissipation_residual(rec)?.into();
        meta["final_energy"] = rec.energies[rec.len() - 1].into();
        records.push(meta);
        if c.snapshot {
            snapshots.push((format!("eta{eta}"), sim.final_state));
        }
    }
    Ok(Artifacts {
        snapshots,
        ..Artifacts::ok(table, serde_json::json!({ "records": records }))
    })
}

fn singular_failure(rows: &[ScanRow], allow: bool) -> Option<String> {
    let bad: Vec<String> = rows
        .iter()
        .filter(|r| r.sample.singular)
        .map(|r| format!("(eta {}, tau {})", r.sample.eta, r.sample.tau))
        .collect();
    (!allow && !bad.is_empty()).then(|| format!("singular fibers at {}", bad.join(", ")))
}

fn scan_summary(rows: &[ScanRow]) -> serde_json::Value {
    let mut per_eta: BTreeMap<String, serde_json::Value> = BTreeMap::new();
    for r in rows {
        let key = format!("{}", r.sample.eta);
        let entry = per_eta.entry(key).or_insert_with(|| {
            serde_json::json!({ "max_tau_bracket_norm": 0.0, "max_bound_ratio": 0.0, "max_tail": 0.0 })
        });
        let bump = |e: &mut serde_json::Value, k: &str, v: f64| {
            let cur = e[k].as_f64().unwrap_or(0.0);
            if v > cur || !v.is_finite() {
                e[k] = if v.is_finite() { v.into() } else { "inf".into() };
            }
        };
        bump(entry, "max_tau_bracket_norm", r.tau_bracket_norm);
        bump(entry, "max_bound_ratio", r.bound_ratio);
        bump(entry, "max_tail", r.sample.tail);
    }
    serde_json::json!({
        "rows": rows.len(),
        "singular": rows.iter().filter(|r| r.sample.singular).count(),
        "truncation_warnings": rows.iter().filter(|r| !r.sample.truncation_ok).count(),
        "per_eta": per_eta,
    })
}

fn run_scan(c: &ScanConfig) -> Result<Artifacts> {
    let plan = ScanPlan {
        mode: c.mode,
        etas: c.etas.clone(),
        taus: c.taus.values()?,
        sigma: c.sigma.clone(),
        cutoff: c.cutoff,
        profile: c.profile.clone(),
        mass: c.mass,
    };
    let rows = scan(&plan)?;
    Ok(Artifacts {
        failure: singular_failure(&rows, c.allow_singular),
        ..Artifacts::ok(scan_table(&rows), scan_summary(&rows))
    })
}

fn run_gcc(c: &GccConfig) -> Result<Artifacts> {
    let dim = c.profile.dim();
    let mut table = Table::new(RayAverageReport::csv_header(dim));
    let mut reports = Vec::new();
    for &t in &c.horizons {
        let r = gcc_infimum(&c.profile, t, c.n_x, c.n_xi)?;
        let mut row: Vec<Cell> = vec![r.horizon.into(), r.n_x.into(), r.n_xi.into(), r.alpha_hat.into()];
        row.extend(r.argmin_x.iter().map(|&x| Cell::from(x)));
        row.extend(r.argmin_xi.iter().map(|&x| Cell::from(x)));
        table.push(row);
        reports.push(r);
    }
    Ok(Artifacts::ok(table, serde_json::json!({ "reports": reports })))
}

fn run_semiclassical(c: &SemiclassicalConfig) -> Result<Artifacts> {
    let dim = c.profile.dim();
    let points = c.sigma.points.unwrap_or_else(|| bloch::default_sigma_points(dim));
    let grid = sigma_grid(dim, points);
    let mut rows = Vec::new();
    for &eps in &c.eps {
        for &h in &c.h {
            let pc = PencilCoefficients::semiclassical(h, eps)?;
            let n = c.cutoff.resolve(&pc);
            let sample = semiclassical_inverse_norm(h, eps, &grid, n, &c.profile, c.sigma.refine)?;
            let v = eps * h * sample.norm;
            rows.push(ScanRow {
                mode: ScanMode::Semiclassical,
                sample,
                tau_bracket_norm: v,
                bound_ratio: v,
            });
        }
    }
    rows.sort_by(|a, b| {
        a.sample
            .eta
            .total_cmp(&b.sample.eta)
            .then(a.sample.tau.total_cmp(&b.sample.tau))
    });
    let values: Vec<f64> = rows.iter().map(|r| r.tau_bracket_norm).collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let summary = serde_json::json!({
        "rows": rows.len(),
        "singular": rows.iter().filter(|r| r.sample.singular).count(),
        "min_scaled_norm": min,
        "max_scaled_norm": if max.is_finite() { serde_json::Value::from(max) } else { "inf".into() },
    });
    Ok(Artifacts {
        failure: singular_failure(&rows, c.allow_singular),
        ..Artifacts::ok(scan_table(&rows), summary)
    })
}

#[derive(Serialize)]
struct LabSummary {
    seed: u64,
    n: usize,
    block_residual: f64,
    semigroup_residual: f64,
    gearhart: Option<crate::semigroup_lab::GearhartReport>,
    borichev_tomilov: crate::semigroup_lab::BorichevTomilovReport,
}

fn run_lab(c: &LabConfig) -> Result<Artifacts> {
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for &seed in &c.seeds {
        for &n in &c.dims {
            let case = random_dissipative(n, seed, c.gap)?;
            let (r1, r2) = block_extension_checks(&case, Complex64::new(0.5, 3.0), 2.0)?;
            let gearhart = if c.gap > 0.0 {
                Some(gearhart_experiment(&case, c.tau_max, c.t_max)?)
            } else {
                None
            };
            let bt = borichev_tomilov_experiment(&case, c.kappa, c.nu, c.tau_max, c.t_max)?;
            summaries.push(LabSummary {
                seed,
                n,
                block_residual: r1,
                semigroup_residual: r2,
                gearhart: gearhart.clone(),
                borichev_tomilov: bt.clone(),
            });
            rows.push(LabRow {
                seed,
                n,
                kind: case.kind.clone(),
                gearhart,
                bt,
            });
        }
    }
    Ok(Artifacts::ok(lab_table(&rows), serde_json::json!({ "cases": summaries })))
}

#[derive(Deserialize)]
struct RecordRow {
    t: f64,
    #[serde(rename = "E")]
    e: f64,
    #[serde(rename = "D")]
    d: f64,
    eta: u32,
}

/// Rebuilds the records of a `simulate` artifact from its CSV and sidecar.
pub fn read_records(csv_path: &Path) -> Result<Vec<DecayRecord>> {
    let sidecar = csv_path.with_extension("json");
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&sidecar)?)?;
    let metas = doc["results"]["records"]
        .as_array()
        .ok_or_else(|| invalid(format!("{} holds no simulate records", sidecar.display())))?;
    let mut rd = csv::Reader::from_path(csv_path)?;
    let mut by_eta: BTreeMap<u32, Vec<RecordRow>> = BTreeMap::new();
    for row in rd.deserialize() {
        let row: RecordRow = row?;
        by_eta.entry(row.eta).or_default().push(row);
    }
    let mut out = Vec::new();
    for meta in metas {
        let eta = meta["eta"]
            .as_u64()
            .ok_or_else(|| invalid("record metadata lacks eta"))? as u32;
        let norms: InputNorms = serde_json::from_value(meta["input_norms"].clone())?;
        let rows = by_eta
            .remove(&eta)
            .ok_or_else(|| invalid(format!("no rows for eta {eta}")))?;
        out.push(DecayRecord {
            times: rows.iter().map(|r| r.t).collect(),
            energies: rows.iter().map(|r| r.e).collect(),
            dissipation: rows.iter().map(|r| r.d).collect(),
            eta,
            input_norms: norms,
            damping: meta["damping"].as_str().unwrap_or_default().to_owned(),
            dt: meta["dt"].as_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(out)
}

fn run_fit(c: &FitConfig) -> Result<Artifacts> {
    let window = Window::new(c.window[0], c.window[1])?;
    let records = read_records(&c.input)?;
    let mut fits: Vec<FitResult> = Vec::new();
    for rec in &records {
        if matches!(c.model, FitKind::Exponential | FitKind::Both) {
            fits.push(fit_exponential(rec, window)?);
        }
        if matches!(c.model, FitKind::PowerBound | FitKind::Both) {
            fits.push(verify_power_bound(rec)?);
        }
    }
    let mut uniformity = Vec::new();
    for model in [crate::decayfit::FitModel::Exponential, crate::decayfit::FitModel::PowerBound] {
        let group: Vec<FitResult> = fits.iter().filter(|f| f.model == model).cloned().collect();
        if group.len() >= 2 {
            uniformity.push(crate::decayfit::uniformity_report(&group)?);
        }
    }
    Ok(Artifacts::ok(
        fit_table(&fits),
        serde_json::json!({ "fits": fits, "uniformity": uniformity }),
    ))
}

fn run_acceptance(c: &AcceptanceConfig, verbose: bool) -> Result<Artifacts> {
    let ids: Vec<usize> = c
        .criteria
        .clone()
        .unwrap_or_else(|| (1..=acceptance::CRITERIA).collect());
    let mut outcomes = Vec::new();
    for id in ids {
        let o = acceptance::run_criterion(id);
        if verbose {
            eprintln!("{}", o.line());
        }
        outcomes.push(o);
    }
    let mut table = Table::new(["id", "name", "passed", "detail"]);
    for o in &outcomes {
        table.push(vec![o.id.into(), o.name.into(), o.passed.into(), o.detail.clone().into()]);
    }
    let failed: Vec<String> = outcomes
        .iter()
        .filter(|o| !o.passed)
        .map(|o| o.id.to_string())
        .collect();
    // timings stay out of the artifacts so reruns are byte-identical
    let summary = serde_json::json!({
        "passed": outcomes.len() - failed.len(),
        "total": outcomes.len(),
        "criteria": outcomes.iter().map(|o| serde_json::json!({
            "id": o.id, "name": o.name, "passed": o.passed, "detail": o.detail,
            "budget_s": o.budget_s,
        })).collect::<Vec<_>>(),
    });
    Ok(Artifacts {
        failure: (!failed.is_empty()).then(|| format!("criteria {} failed", failed.join(", "))),
        ..Artifacts::ok(table, summary)
    })
}
