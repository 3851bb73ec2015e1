//! Command-line driver: spectrum estimation, certification, structural
//! checks, the convergence study and plain simulation.
//!
//! Every run resolves its parameters from an optional `key=value` config
//! file overridden by command-line flags, derives a deterministic run id
//! from the resolved configuration, and (with `--out`) writes CSV/JSON
//! results plus a `manifest.txt` describing the run. Outputs contain no
//! timestamps, so identical invocations produce identical bytes.

use crate::certifier;
use crate::engine::{self, RunConfig, RunOptions, TimeDistribution};
use crate::flows::{self, CompiledField, FlowKind};
use crate::lyapunov;
use crate::models::{self, SplitModel};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Parser)]
#[command(
    name = "randsplit",
    about = "Random splitting of conservative quadratic flows: simulation, \
             Lyapunov spectra and Lie-bracket certification"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Estimate the Lyapunov spectrum over one or more seeds.
    Lyapunov(RunArgs),
    /// Certify the Lie-bracket rank condition at the closed-form test point.
    Certify(RunArgs),
    /// Verify the closed-form shear structure of resonant single-field flows.
    ShearCheck(RunArgs),
    /// Deterministic-splitting convergence study against a reference orbit.
    Convergence(RunArgs),
    /// Compare the time average of x_1^2 against the uniform-measure value.
    ErgodicCheck(RunArgs),
    /// Simulate the chain and report conservation drift and final state.
    Simulate(RunArgs),
}

/// Shared flag set. Every flag is optional; unset flags fall back to the
/// config file, then to built-in defaults.
#[derive(Args, Clone, Default)]
pub struct RunArgs {
    /// Configuration file with one `key = value` pair per line.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Model family: `lorenz` or `euler`.
    #[arg(long)]
    pub model: Option<String>,
    /// Lorenz dimension.
    #[arg(long)]
    pub n: Option<usize>,
    /// Euler truncation radius.
    #[arg(long = "N")]
    pub n_trunc: Option<i32>,
    /// Lorenz sphere radius.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Euler enstrophy target.
    #[arg(long)]
    pub enstrophy: Option<f64>,
    /// Euler energy target.
    #[arg(long)]
    pub energy: Option<f64>,
    /// Background amplitude of the Euler test point.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Time-step scale.
    #[arg(long)]
    pub h: Option<f64>,
    /// Comma-separated step sizes for the convergence study.
    #[arg(long = "h-grid")]
    pub h_grid: Option<String>,
    /// Flow-time distribution: `exp` or `uniform`.
    #[arg(long)]
    pub dist: Option<String>,
    /// Number of splitting cycles (or resonant multiples for shear-check).
    #[arg(long)]
    pub steps: Option<u64>,
    /// Cycles excluded from the estimators.
    #[arg(long = "burn-in")]
    pub burn_in: Option<u64>,
    /// Number of tangent directions carried.
    #[arg(long)]
    pub frame: Option<usize>,
    /// Base RNG seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of consecutive seeds to run.
    #[arg(long)]
    pub seeds: Option<u64>,
    /// Worker threads for multi-seed runs (default: all cores).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Tolerance (integrator tolerance, rank tolerance, or check bound).
    #[arg(long)]
    pub tol: Option<f64>,
}

/// Fully resolved run parameters.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub model: String,
    pub n: usize,
    pub n_trunc: i32,
    pub radius: f64,
    pub enstrophy: f64,
    pub energy: f64,
    pub beta: Option<f64>,
    pub h: f64,
    pub h_grid: Vec<f64>,
    pub dist: String,
    pub steps: u64,
    pub burn_in: Option<u64>,
    pub frame: Option<usize>,
    pub seed: u64,
    pub seeds: u64,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub tol: Option<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Engine(#[from] engine::EngineError),
    #[error(transparent)]
    Certify(#[from] certifier::CertifyError),
}

/// Config keys mirroring the command-line flags one to one.
const CONFIG_KEYS: [&str; 18] = [
    "model", "n", "N", "radius", "enstrophy", "energy", "beta", "h", "h-grid", "dist", "steps",
    "burn-in", "frame", "seed", "seeds", "workers", "out", "tol",
];

fn load_config(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path)?;
    let mut map = BTreeMap::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            CliError::Config(format!("{}:{}: expected key = value", path.display(), ln + 1))
        })?;
        let k = k.trim();
        if !CONFIG_KEYS.contains(&k) {
            return Err(CliError::Config(format!(
                "{}:{}: unknown key '{k}'",
                path.display(),
                ln + 1
            )));
        }
        map.insert(k.to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn merge<T: FromStr>(
    flag: Option<T>,
    cfg: &BTreeMap<String, String>,
    key: &str,
) -> Result<Option<T>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match cfg.get(key) {
        None => Ok(None),
        Some(s) => s
            .parse::<T>()
            .map(Some)
            .map_err(|_| CliError::Config(format!("config key '{key}': cannot parse '{s}'"))),
    }
}

fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("bad step size '{p}' in h-grid")))
        })
        .collect()
}

impl RunArgs {
    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let cfg = match &self.config {
            Some(p) => load_config(p)?,
            None => BTreeMap::new(),
        };
        let grid = match merge(self.h_grid.clone(), &cfg, "h-grid")? {
            Some(s) => parse_grid(&s)?,
            None => vec![0.1, 0.05, 0.025],
        };
        Ok(Resolved {
            model: merge(self.model.clone(), &cfg, "model")?.unwrap_or_else(|| "lorenz".into()),
            n: merge(self.n, &cfg, "n")?.unwrap_or(4),
            n_trunc: merge(self.n_trunc, &cfg, "N")?.unwrap_or(3),
            radius: merge(self.radius, &cfg, "radius")?.unwrap_or(1.0),
            enstrophy: merge(self.enstrophy, &cfg, "enstrophy")?.unwrap_or(1.0),
            energy: merge(self.energy, &cfg, "energy")?.unwrap_or(0.5),
            beta: merge(self.beta, &cfg, "beta")?,
            h: merge(self.h, &cfg, "h")?.unwrap_or(1.0),
            h_grid: grid,
            dist: merge(self.dist.clone(), &cfg, "dist")?.unwrap_or_else(|| "exp".into()),
            steps: merge(self.steps, &cfg, "steps")?.unwrap_or(100_000),
            burn_in: merge(self.burn_in, &cfg, "burn-in")?,
            frame: merge(self.frame, &cfg, "frame")?,
            seed: merge(self.seed, &cfg, "seed")?.unwrap_or(1),
            seeds: merge(self.seeds, &cfg, "seeds")?.unwrap_or(1),
            workers: merge(self.workers, &cfg, "workers")?,
            out: merge(self.out.clone(), &cfg, "out")?,
            tol: merge(self.tol, &cfg, "tol")?,
        })
    }
}

impl Resolved {
    /// Default background amplitude: `0.01` when inside the feasible
    /// interval, otherwise a tenth of its upper end.
    pub fn euler_beta(&self) -> Result<f64, CliError> {
        if let Some(b) = self.beta {
            return Ok(b);
        }
        let zmax = certifier::euler_beta_max(self.n_trunc, self.enstrophy, self.energy)
            .ok_or_else(|| {
                CliError::Config(format!(
                    "no feasible test point for enstrophy {} energy {}",
                    self.enstrophy, self.energy
                ))
            })?;
        Ok(if 0.01 < zmax { 0.01 } else { 0.1 * zmax })
    }

    pub fn build_model(&self) -> Result<SplitModel, CliError> {
        match self.model.as_str() {
            "lorenz" => Ok(models::lorenz_model(self.n, self.radius)),
            "euler" => {
                let beta = self.euler_beta()?;
                let point =
                    certifier::euler_test_point(self.n_trunc, self.enstrophy, self.energy, beta)?;
                let modes = models::half_lattice(self.n_trunc);
                Ok(models::euler_model(self.n_trunc, point.state_in(&modes)))
            }
            other => Err(CliError::Config(format!(
                "unknown model '{other}' (expected 'lorenz' or 'euler')"
            ))),
        }
    }

    /// Canonical key=value rendering (sorted keys) used for the manifest and
    /// the run id.
    pub fn canonical(&self, command: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "N = {}", self.n_trunc);
        if let Some(b) = self.beta {
            let _ = writeln!(s, "beta = {b:e}");
        }
        if let Some(b) = self.burn_in {
            let _ = writeln!(s, "burn-in = {b}");
        }
        let _ = writeln!(s, "command = {command}");
        let _ = writeln!(s, "dist = {}", self.dist);
        let _ = writeln!(s, "energy = {:e}", self.energy);
        let _ = writeln!(s, "enstrophy = {:e}", self.enstrophy);
        if let Some(f) = self.frame {
            let _ = writeln!(s, "frame = {f}");
        }
        let _ = writeln!(s, "h = {:e}", self.h);
        let _ = writeln!(
            s,
            "h-grid = {}",
            self.h_grid
                .iter()
                .map(|v| format!("{v:e}"))
                .collect::<Vec<_>>()
                .join(",")
        );
        let _ = writeln!(s, "model = {}", self.model);
        let _ = writeln!(s, "n = {}", self.n);
        let _ = writeln!(s, "radius = {:e}", self.radius);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "seeds = {}", self.seeds);
        let _ = writeln!(s, "steps = {}", self.steps);
        if let Some(t) = self.tol {
            let _ = writeln!(s, "tol = {t:e}");
        }
        s
    }
}

/// Deterministic run identifier: SHA-256 of the canonical configuration plus
/// the seed, truncated to 12 hex digits.
pub fn run_id(canonical: &str, seed: u64) -> String {
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    hasher.update(seed.to_le_bytes());
    let digest = hasher.finalize();
    let mut s = String::new();
    for b in &digest[..6] {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// First line of every CSV artifact; bumped on layout changes.
const CSV_SCHEMA: &str = "# schema = 1\n";

fn ensure_out(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn write_manifest(dir: &Path, canonical: &str, ids: &[String]) -> Result<(), CliError> {
    let mut text = canonical.to_string();
    for id in ids {
        let _ = writeln!(text, "run = {id}");
    }
    std::fs::write(dir.join("manifest.txt"), text)?;
    Ok(())
}

fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .expect("thread pool")
            .install(f),
        None => f(),
    }
}

// ---------------------------------------------------------------------------
// Subcommand drivers
// ---------------------------------------------------------------------------

/// Per-seed spectrum rows plus pass/fail of the zero-sum check.
fn cmd_lyapunov(r: &Resolved) -> Result<bool, CliError> {
    let model = r.build_model()?;
    let canonical = r.canonical("lyapunov");
    let frame = r.frame.unwrap_or_else(|| model.tangent_dim());
    let dist = TimeDistribution::from_name(&r.dist)?;
    let burn = r.burn_in.unwrap_or_else(|| engine::default_burn_in(r.steps));
    let tol = r.tol.unwrap_or(1e-10);
    let seeds: Vec<u64> = (0..r.seeds).map(|i| r.seed + i).collect();

    let opts = RunOptions {
        trace_points: 1000,
        ..RunOptions::default()
    };
    let results: Vec<Result<engine::RunResult, engine::EngineError>> =
        with_pool(r.workers, || {
            use rayon::prelude::*;
            seeds
                .par_iter()
                .map(|&seed| {
                    let cfg = RunConfig {
                        h: r.h,
                        dist: dist.clone(),
                        cycles: r.steps,
                        burn_in: burn,
                        frame,
                        seed,
                        tol,
                    };
                    lyapunov::estimate_spectrum(&model, &cfg, &opts)
                })
                .collect()
        });

    let mut rows = Vec::new();
    for (seed, res) in seeds.iter().zip(results) {
        rows.push((*seed, res?));
    }

    // Exponents are reported both per splitting cycle and per unit model
    // time; one cycle advances the clock by h times the number of fields on
    // average (the flow times have mean one).
    let time_per_cycle = r.h * model.fields.len() as f64;
    let mut csv = String::from(CSV_SCHEMA);
    csv.push_str("seed,run_id");
    for i in 0..frame {
        let _ = write!(csv, ",lambda_{},stderr_{}", i + 1, i + 1);
    }
    for i in 0..frame {
        let _ = write!(csv, ",lambda_time_{}", i + 1);
    }
    csv.push_str(",sum,sum_stderr");
    for i in 0..model.conserved.len() {
        let _ = write!(csv, ",drift_{}", i + 1);
    }
    csv.push('\n');
    let mut ids = Vec::new();
    for (seed, res) in &rows {
        let id = run_id(&canonical, *seed);
        let _ = write!(csv, "{seed},{id}");
        for i in 0..frame {
            let _ = write!(csv, ",{:.16e},{:.16e}", res.exponents[i], res.stderrs[i]);
        }
        for i in 0..frame {
            let per_time = if time_per_cycle > 0.0 {
                res.exponents[i] / time_per_cycle
            } else {
                0.0
            };
            let _ = write!(csv, ",{per_time:.16e}");
        }
        let _ = write!(csv, ",{:.16e},{:.16e}", res.sum, res.sum_stderr);
        for d in &res.drift {
            let _ = write!(csv, ",{d:.16e}");
        }
        csv.push('\n');
        ids.push(id);
    }

    if let Some(dir) = &r.out {
        ensure_out(dir)?;
        std::fs::write(dir.join("results.csv"), &csv)?;
        for ((_, res), id) in rows.iter().zip(&ids) {
            if res.trace.is_empty() {
                continue;
            }
            let mut tr = String::from(CSV_SCHEMA);
            tr.push_str("cycle");
            for i in 0..frame {
                let _ = write!(tr, ",lambda_{}", i + 1);
            }
            tr.push('\n');
            for p in &res.trace {
                let _ = write!(tr, "{}", p.cycle);
                for e in &p.exponents {
                    let _ = write!(tr, ",{e:.16e}");
                }
                tr.push('\n');
            }
            std::fs::write(dir.join(format!("trace_{id}.csv")), tr)?;
        }
        write_manifest(dir, &canonical, &ids)?;
    }

    let mut ok = true;
    for (seed, res) in &rows {
        println!(
            "seed {seed}: lambda_1 = {:.6e} +- {:.6e}, sum = {:.3e} +- {:.3e}, max drift = {:.3e}",
            res.exponents[0],
            res.stderrs[0],
            res.sum,
            res.sum_stderr,
            res.drift.iter().cloned().fold(0.0, f64::max)
        );
        if frame == model.tangent_dim() {
            ok &= res.sum.abs() <= (3.0 * res.sum_stderr).max(1e-4);
        }
    }
    Ok(ok)
}

fn cmd_certify(r: &Resolved) -> Result<bool, CliError> {
    let canonical = r.canonical("certify");
    let rank_tol = r.tol.unwrap_or(1e-10);
    let det_tol = 1e-8;
    let (json, pass, summary) = match r.model.as_str() {
        "lorenz" => {
            let cert = certifier::certify_lorenz(r.n, r.radius, rank_tol, det_tol);
            let summary = format!(
                "lorenz n={}: rank {}/{} (min retained/threshold = {:.2e}), {} block dets, pass = {}",
                r.n,
                cert.rank.rank,
                cert.expected_rank,
                cert.rank.smallest_retained / cert.rank.threshold,
                cert.blocks.len(),
                cert.pass
            );
            (serde_json::to_string_pretty(&cert).unwrap(), cert.pass, summary)
        }
        "euler" => {
            let beta = r.euler_beta()?;
            let cert = certifier::certify_euler(
                r.n_trunc,
                r.enstrophy,
                r.energy,
                beta,
                rank_tol,
                det_tol,
            )?;
            let summary = format!(
                "euler N={}: rank {}/{} (min retained/threshold = {:.2e}), {} block dets, pass = {}",
                r.n_trunc,
                cert.rank.rank,
                cert.expected_rank,
                cert.rank.smallest_retained / cert.rank.threshold,
                cert.blocks.len(),
                cert.pass
            );
            (serde_json::to_string_pretty(&cert).unwrap(), cert.pass, summary)
        }
        other => {
            return Err(CliError::Config(format!("unknown model '{other}'")));
        }
    };
    println!("{summary}");
    if let Some(dir) = &r.out {
        ensure_out(dir)?;
        std::fs::write(dir.join(format!("certify_{}.json", r.model)), json)?;
        write_manifest(dir, &canonical, &[])?;
    }
    Ok(pass)
}

/// Result of the resonant-shear check on one rotation field.
#[derive(Clone, Debug, Serialize)]
pub struct ShearCase {
    pub label: String,
    pub max_state_error: f64,
    pub max_jacobian_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ShearReport {
    pub multiples: u64,
    pub tolerance: f64,
    pub cases: Vec<ShearCase>,
    pub pass: bool,
}

/// At resonant times `t_m = 2 pi m / |c x_l|` a rotation field returns the
/// state exactly and its flow Jacobian is `I + m A`, where the single
/// nontrivial column of `A` shears along the frozen coordinate. Checks both
/// identities for `m = 1..=multiples`.
pub fn shear_check_field(field: &CompiledField, state: &[f64], multiples: u64) -> (f64, f64) {
    assert_eq!(field.kind, FlowKind::Rotation);
    let [c0, c1, c2] = field.coords;
    let c = field.rates[0];
    let omega = c * state[c2];
    assert!(omega != 0.0, "resonance needs a nonzero rotation rate");
    let mut max_state: f64 = 0.0;
    let mut max_jac: f64 = 0.0;
    for m in 1..=multiples {
        let t = 2.0 * std::f64::consts::PI * m as f64 / omega.abs();
        let mut x = state.to_vec();
        let jac = flows::advance_with_jacobian(field, &mut x, t, 1e-12).expect("closed form");
        for (a, b) in x.iter().zip(state) {
            max_state = max_state.max((a - b).abs());
        }
        let ct = c * t;
        let expected = nalgebra::Matrix3::new(
            1.0,
            0.0,
            ct * state[c1],
            0.0,
            1.0,
            -ct * state[c0],
            0.0,
            0.0,
            1.0,
        );
        max_jac = max_jac.max((jac - expected).abs().max());
    }
    (max_state, max_jac)
}

fn cmd_shear(r: &Resolved) -> Result<bool, CliError> {
    let canonical = r.canonical("shear-check");
    // The default step count is meant for chain runs; interpret it as the
    // conventional ten resonant multiples here.
    let multiples = if r.steps == 100_000 { 10 } else { r.steps.clamp(1, 1000) };
    let tol = r.tol.unwrap_or(1e-10);
    let mut cases = Vec::new();

    let lorenz = models::lorenz_model(r.n, r.radius);
    let (s, j) = shear_check_field(&lorenz.fields[0], &lorenz.initial, multiples);
    cases.push(ShearCase {
        label: format!("lorenz n={} field 0", r.n),
        max_state_error: s,
        max_jacobian_error: j,
    });

    // Build the Euler model at the certification test point and take the
    // first field whose flow is a closed-form rotation.
    let beta = r.euler_beta()?;
    let point = certifier::euler_test_point(r.n_trunc, r.enstrophy, r.energy, beta)?;
    let modes = models::half_lattice(r.n_trunc);
    let euler = models::euler_model(r.n_trunc, point.state_in(&modes));
    let rot = euler
        .fields
        .iter()
        .find(|f| f.kind == FlowKind::Rotation)
        .expect("the truncation contains equal-norm pairs, so rotation fields exist");
    let (s, j) = shear_check_field(rot, &euler.initial, multiples);
    cases.push(ShearCase {
        label: format!("euler N={} first rotation field", r.n_trunc),
        max_state_error: s,
        max_jacobian_error: j,
    });

    let pass = cases
        .iter()
        .all(|c| c.max_state_error <= tol && c.max_jacobian_error <= tol);
    let report = ShearReport {
        multiples,
        tolerance: tol,
        cases,
        pass,
    };
    for c in &report.cases {
        println!(
            "{}: state error {:.3e}, jacobian error {:.3e}",
            c.label, c.max_state_error, c.max_jacobian_error
        );
    }
    println!("shear check pass = {pass}");
    if let Some(dir) = &r.out {
        ensure_out(dir)?;
        std::fs::write(
            dir.join("shear_check.json"),
            serde_json::to_string_pretty(&report).unwrap(),
        )?;
        write_manifest(dir, &canonical, &[])?;
    }
    Ok(pass)
}

fn cmd_convergence(r: &Resolved) -> Result<bool, CliError> {
    let canonical = r.canonical("convergence");
    let report = lyapunov::convergence_study(r.n, r.radius, &r.h_grid, 1.0)?;
    let mut csv = String::from(CSV_SCHEMA);
    csv.push_str("h,cycles,error\n");
    for p in &report.points {
        let _ = writeln!(csv, "{:.16e},{},{:.16e}", p.h, p.cycles, p.error);
        println!("h = {:<10} error = {:.6e}", p.h, p.error);
    }
    println!("fitted order = {:.3}", report.fitted_order);
    if let Some(dir) = &r.out {
        ensure_out(dir)?;
        std::fs::write(dir.join("results.csv"), &csv)?;
        write_manifest(dir, &canonical, &[])?;
    }
    Ok(report.fitted_order >= 0.8)
}

fn cmd_ergodic(r: &Resolved) -> Result<bool, CliError> {
    if r.model != "lorenz" {
        return Err(CliError::Config(
            "ergodic-check compares against the uniform sphere measure and supports only the lorenz model".into(),
        ));
    }
    let canonical = r.canonical("ergodic-check");
    let model = r.build_model()?;
    let cfg = RunConfig {
        h: r.h,
        dist: TimeDistribution::from_name(&r.dist)?,
        cycles: r.steps,
        burn_in: r.burn_in.unwrap_or_else(|| engine::default_burn_in(r.steps)),
        frame: 0,
        seed: r.seed,
        tol: r.tol.unwrap_or(1e-10),
    };
    let opts = RunOptions {
        observable: true,
        ..RunOptions::default()
    };
    let res = engine::run(&model, &cfg, &opts)?;
    let expected = r.radius * r.radius / r.n as f64;
    let dev = (res.observable_mean - expected).abs();
    let pass = dev <= 3.0 * res.observable_stderr;
    println!(
        "avg x_1^2 = {:.8e} +- {:.3e} (uniform value {:.8e}, deviation {:.3e}), pass = {}",
        res.observable_mean, res.observable_stderr, expected, dev, pass
    );
    if let Some(dir) = &r.out {
        ensure_out(dir)?;
        let id = run_id(&canonical, r.seed);
        let csv = format!(
            "{CSV_SCHEMA}seed,run_id,mean,stderr,expected,deviation\n\
             {},{},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            r.seed, id, res.observable_mean, res.observable_stderr, expected, dev
        );
        std::fs::write(dir.join("results.csv"), csv)?;
        write_manifest(dir, &canonical, &[id])?;
    }
    Ok(pass)
}

fn cmd_simulate(r: &Resolved) -> Result<bool, CliError> {
    let canonical = r.canonical("simulate");
    let model = r.build_model()?;
    let frame = r.frame.unwrap_or(0);
    let cfg = RunConfig {
        h: r.h,
        dist: TimeDistribution::from_name(&r.dist)?,
        cycles: r.steps,
        burn_in: r.burn_in.unwrap_or_else(|| engine::default_burn_in(r.steps)),
        frame,
        seed: r.seed,
        tol: r.tol.unwrap_or(1e-10),
    };
    let opts = RunOptions {
        trace_points: 1000,
        ..RunOptions::default()
    };
    let res = engine::run(&model, &cfg, &opts)?;
    println!(
        "{}: {} cycles, max conservation drift = {:.3e}",
        model.name,
        r.steps,
        res.drift.iter().cloned().fold(0.0, f64::max)
    );
    if let Some(dir) = &r.out {
        ensure_out(dir)?;
        let id = run_id(&canonical, r.seed);
        let mut csv = String::from(CSV_SCHEMA);
        csv.push_str("seed,run_id");
        for i in 0..model.conserved.len() {
            let _ = write!(csv, ",drift_{}", i + 1);
        }
        for i in 0..model.dim {
            let _ = write!(csv, ",x_{}", i + 1);
        }
        csv.push('\n');
        let _ = write!(csv, "{},{}", r.seed, id);
        for d in &res.drift {
            let _ = write!(csv, ",{d:.16e}");
        }
        for v in &res.final_state {
            let _ = write!(csv, ",{v:.16e}");
        }
        csv.push('\n');
        std::fs::write(dir.join("results.csv"), &csv)?;
        if !res.trace.is_empty() {
            let mut tr = String::from(CSV_SCHEMA);
            tr.push_str("cycle");
            for i in 0..frame {
                let _ = write!(tr, ",lambda_{}", i + 1);
            }
            tr.push('\n');
            for p in &res.trace {
                let _ = write!(tr, "{}", p.cycle);
                for e in &p.exponents {
                    let _ = write!(tr, ",{e:.16e}");
                }
                tr.push('\n');
            }
            std::fs::write(dir.join(format!("trace_{id}.csv")), tr)?;
        }
        write_manifest(dir, &canonical, &[id])?;
    }
    Ok(true)
}

/// Parse the process arguments, dispatch, and return the process exit code:
/// 0 when the run's checks pass, 1 when a check fails, 2 on errors.
pub fn run() -> i32 {
    let cli = Cli::parse();
    let (args, f): (&RunArgs, fn(&Resolved) -> Result<bool, CliError>) = match &cli.command {
        Command::Lyapunov(a) => (a, cmd_lyapunov),
        Command::Certify(a) => (a, cmd_certify),
        Command::ShearCheck(a) => (a, cmd_shear),
        Command::Convergence(a) => (a, cmd_convergence),
        Command::ErgodicCheck(a) => (a, cmd_ergodic),
        Command::Simulate(a) => (a, cmd_simulate),
    };
    let resolved = match args.resolve() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    match f(&resolved) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    }
}
