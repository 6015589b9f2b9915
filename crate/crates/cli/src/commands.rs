//! Subcommand implementations. Each returns a typed result so the binary
//! and the integration tests share one code path.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use geonode::adjoint::{cost, cost_and_gradient, goal_errors, simulate as simulate_traj};
use geonode::atlas::ChartState;
use geonode::dynamics::{hamiltonian, Controller, ControllerSpec};
use geonode::integrate::{LieOptions, SolverConfig};
use geonode::lie::se3::Momentum;
use geonode::lie::ProductElement;
use geonode::training::{evaluate, sample_initial, EpochRecord, EvalReport, SamplerSpec, Trainer};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::checkpoint::Checkpoint;
use crate::config::{PoseConfig, RunConfig};
use crate::csv::{num, opt, CsvWriter};
use crate::CliError;

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Failed(format!("{}: {e}", path.display()))
}

// ---------------------------------------------------------------- train

#[derive(Clone, Debug)]
pub struct TrainArgs {
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub resume: Option<PathBuf>,
    pub epochs: Option<usize>,
}

pub const METRICS_HEADER: [&str; 7] =
    ["epoch", "loss", "terminal_loss", "integral_loss", "mean_final_angle", "mean_final_distance", "wall_time"];

/// Two configs may share a run if they differ at most in the epoch budget.
fn resume_key(c: &RunConfig) -> String {
    let mut c = c.clone();
    c.train.epochs = 0;
    c.hash()
}

pub fn checkpoint_path(out: &Path, epoch: usize) -> PathBuf {
    out.join(format!("checkpoint_{epoch:06}.json"))
}

pub fn final_checkpoint_path(out: &Path) -> PathBuf {
    out.join("checkpoint_final.json")
}

/// Keeps the header and the rows of epochs ≤ `epoch`.
fn truncate_metrics(path: &Path, epoch: usize) -> Result<CsvWriter, CliError> {
    if !path.exists() {
        let mut w = CsvWriter::create(path, &METRICS_HEADER)?;
        w.flush()?;
        return CsvWriter::append(path);
    }
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut kept: Vec<&str> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let first = line.split(',').next().unwrap_or("");
        if i == 0 || first.parse::<usize>().is_ok_and(|e| e <= epoch) {
            kept.push(line);
        }
    }
    let body: String = kept.iter().map(|l| format!("{l}\n")).collect();
    fs::write(path, body).map_err(|e| io_err(path, e))?;
    CsvWriter::append(path)
}

fn metrics_row(r: &EpochRecord) -> Vec<String> {
    vec![
        r.epoch.to_string(),
        num(r.loss),
        num(r.terminal_loss),
        num(r.integral_loss),
        opt(r.holdout.map(|h| h.mean_final_angle)),
        opt(r.holdout.map(|h| h.mean_final_distance)),
        num(r.wall_time),
    ]
}

pub fn train(args: &TrainArgs) -> Result<Vec<EpochRecord>, CliError> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        config.train.seed = s;
    }
    if let Some(e) = args.epochs {
        config.train.epochs = e;
    }
    let setup = config.build()?;
    fs::create_dir_all(&args.out).map_err(|e| io_err(&args.out, e))?;
    let cfg_path = args.out.join("config.json");
    fs::write(&cfg_path, config.to_json() + "\n").map_err(|e| io_err(&cfg_path, e))?;

    let mut trainer = Trainer::new(setup.train, setup.controller, setup.cost, setup.body, setup.sampler, setup.solver)?;
    let metrics_path = args.out.join("metrics.csv");
    let mut metrics = match &args.resume {
        Some(path) => {
            let ck = Checkpoint::load(path)?;
            if resume_key(&ck.config) != resume_key(&config) {
                return Err(CliError::Mismatch(format!(
                    "checkpoint {} was written by a different configuration (hash {} vs {})",
                    path.display(),
                    ck.config_hash,
                    config.hash()
                )));
            }
            trainer.restore(&ck.trainer_state().map_err(CliError::Input)?)?;
            log::info!("resuming '{}' after epoch {}", config.name, trainer.epoch);
            truncate_metrics(&metrics_path, trainer.epoch)?
        }
        None => CsvWriter::create(&metrics_path, &METRICS_HEADER)?,
    };
    metrics.flush()?;

    let epochs = config.train.epochs;
    let mut records = Vec::new();
    while trainer.epoch < epochs {
        let rec = trainer.step_epoch()?;
        metrics.row(metrics_row(&rec))?;
        metrics.flush()?;
        match rec.holdout {
            Some(h) => log::info!(
                "epoch {}/{epochs}: loss {:.6e}, held-out angle {:.4}, distance {:.4}, {:.2}s",
                rec.epoch,
                rec.loss,
                h.mean_final_angle,
                h.mean_final_distance,
                rec.wall_time
            ),
            None => log::info!("epoch {}/{epochs}: loss {:.6e}, {:.2}s", rec.epoch, rec.loss, rec.wall_time),
        }
        if rec.epoch % config.train.eval_every == 0 {
            Checkpoint::new(&config, &trainer.controller, &trainer.state()).save(&checkpoint_path(&args.out, rec.epoch))?;
        }
        records.push(rec);
    }
    Checkpoint::new(&config, &trainer.controller, &trainer.state()).save(&final_checkpoint_path(&args.out))?;
    Ok(records)
}

// ------------------------------------------------------------- simulate

#[derive(Clone, Debug, PartialEq)]
pub enum InitSpec {
    Random(u64),
    File(PathBuf),
}

impl FromStr for InitSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if let Some(seed) = s.strip_prefix("random:") {
            return seed.parse().map(InitSpec::Random).map_err(|e| format!("bad seed in {s:?}: {e}"));
        }
        let path = s.strip_prefix("file:").unwrap_or(s);
        if path.is_empty() {
            return Err("expected random:SEED or a file path".into());
        }
        Ok(InitSpec::File(PathBuf::from(path)))
    }
}

/// Initial state file: pose (rotation rows, translation) and momentum.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitState {
    #[serde(default)]
    pub pose: PoseConfig,
    #[serde(default)]
    pub momentum: [f64; 6],
}

impl InitSpec {
    pub fn resolve(&self, sampler: &SamplerSpec) -> Result<ProductElement, CliError> {
        match self {
            InitSpec::Random(seed) => Ok(sample_initial(sampler, &mut ChaCha8Rng::seed_from_u64(*seed))),
            InitSpec::File(path) => {
                let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
                let s: InitState =
                    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
                let pose = s.pose.to_pose("pose")?;
                if s.momentum.iter().any(|v| !v.is_finite()) {
                    return Err(CliError::Input("momentum must be finite".into()));
                }
                Ok(ProductElement::new(pose, Momentum::from_column_slice(&s.momentum)))
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct SimulateArgs {
    pub checkpoint: PathBuf,
    pub init: InitSpec,
    pub duration: f64,
    pub out: PathBuf,
    /// Uniform output spacing; accepted solver steps when absent.
    pub dt: Option<f64>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
}

pub fn simulate_header() -> Vec<String> {
    let mut h: Vec<String> = vec!["t".into(), "chart_index".into()];
    h.extend((1..=6).map(|i| format!("q{i}")));
    h.extend((1..=6).map(|i| format!("P{i}")));
    h.extend(["angle_to_goal", "distance_to_goal", "E_kin", "E_pot", "E_total"].map(String::from));
    h.extend((1..=6).map(|i| format!("W{i}")));
    h
}

fn override_tolerances(mut s: SolverConfig, rtol: Option<f64>, atol: Option<f64>) -> Result<SolverConfig, CliError> {
    if let Some(r) = rtol {
        s.rtol = r;
    }
    if let Some(a) = atol {
        s.atol = a;
    }
    s.validate()?;
    Ok(s)
}

pub fn simulate(args: &SimulateArgs) -> Result<usize, CliError> {
    if !(args.duration.is_finite() && args.duration >= 0.0) {
        return Err(CliError::Input(format!("--duration must be finite and ≥ 0 (got {})", args.duration)));
    }
    let ck = Checkpoint::load(&args.checkpoint)?;
    let setup = ck.config.build()?;
    let ctrl = ck.controller()?;
    let solver = override_tolerances(setup.solver.clone(), args.rtol, args.atol)?;
    let g0 = args.init.resolve(&setup.sampler)?;
    let traj = simulate_traj(&setup.cost, &ctrl, &setup.body, &g0, args.duration, &solver, &LieOptions::default())?;
    let states: Vec<(f64, ChartState)> = match args.dt {
        Some(dt) if !(dt.is_finite() && dt > 0.0) => return Err(CliError::Input(format!("--dt must be > 0 (got {dt})"))),
        Some(dt) => {
            let n = (args.duration / dt).round() as usize;
            let mut ts: Vec<f64> = (0..=n).map(|k| (k as f64 * dt).min(args.duration)).collect();
            if *ts.last().expect("t = 0") < args.duration {
                ts.push(args.duration);
            }
            ts.dedup();
            ts.into_iter().map(|t| traj.dense_eval(t).map(|s| (t, s))).collect::<geonode::Result<_>>()?
        }
        None => traj.samples(),
    };

    let mut w = CsvWriter::create(&args.out, &simulate_header().iter().map(String::as_str).collect::<Vec<_>>())?;
    for (t, state) in &states {
        let g: ProductElement = state.element()?;
        let (angle, dist) = goal_errors(&setup.cost, &g.pose);
        let e = hamiltonian(&setup.body, &ctrl, &g.pose, &g.mom)?;
        let wrench = ctrl.wrench(&setup.body, &g.pose, &g.mom)?.total;
        let mut row = vec![num(*t), state.chart.to_string()];
        row.extend(state.q.rows(0, 6).iter().map(|v| num(*v)));
        row.extend(g.mom.iter().map(|v| num(*v)));
        row.extend([angle, dist, e.kinetic, e.potential, e.total].map(num));
        row.extend(wrench.iter().map(|v| num(*v)));
        w.row(row)?;
    }
    w.flush()?;
    Ok(states.len())
}

// ----------------------------------------------------------------- eval

#[derive(Clone, Debug)]
pub struct EvalArgs {
    pub checkpoint: PathBuf,
    pub n: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub bins: usize,
    /// Simulated time; the configured horizon when absent.
    pub duration: Option<f64>,
}

/// `runs/eval.csv` → `runs/eval_bins.csv`.
pub fn bins_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "eval".into());
    out.with_file_name(format!("{stem}_bins.csv"))
}

pub fn eval(args: &EvalArgs) -> Result<EvalReport, CliError> {
    if args.bins == 0 {
        return Err(CliError::Input("--bins must be ≥ 1".into()));
    }
    let ck = Checkpoint::load(&args.checkpoint)?;
    let mut setup = ck.config.build()?;
    if let Some(d) = args.duration {
        if !(d.is_finite() && d >= 0.0) {
            return Err(CliError::Input(format!("--duration must be finite and ≥ 0 (got {d})")));
        }
        setup.cost.horizon = d;
    }
    let ctrl = ck.controller()?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let report = evaluate(&ctrl, &setup.body, &setup.cost, &setup.sampler, args.n, &mut rng, &setup.solver, args.bins);
    for (i, msg) in &report.failures {
        log::warn!("trajectory {i} failed: {msg}");
    }
    if args.n > 0 && report.trajectories.is_empty() {
        return Err(CliError::Failed(format!("all {} trajectories failed", args.n)));
    }

    let mut w = CsvWriter::create(
        &args.out,
        &[
            "index",
            "initial_angle",
            "initial_distance",
            "final_angle",
            "final_distance",
            "initial_energy",
            "final_kinetic",
            "final_potential",
        ],
    )?;
    for t in &report.trajectories {
        w.row(
            std::iter::once(t.index.to_string()).chain(
                [
                    t.initial_angle,
                    t.initial_distance,
                    t.final_angle,
                    t.final_distance,
                    t.initial_energy,
                    t.final_kinetic,
                    t.final_potential,
                ]
                .map(num),
            ),
        )?;
    }
    w.flush()?;
    let mut b = CsvWriter::create(
        &bins_path(&args.out),
        &["t", "mean_angle", "mean_distance", "mean_kinetic", "mean_potential", "kinetic_share", "potential_share"],
    )?;
    for m in &report.bins {
        b.row([m.t, m.angle, m.distance, m.kinetic, m.potential, m.kinetic_share, m.potential_share].map(num))?;
    }
    b.flush()?;
    Ok(report)
}

// ------------------------------------------------------------ gradcheck

#[derive(Clone, Debug)]
pub struct GradcheckArgs {
    pub config: PathBuf,
    pub eps: f64,
    pub samples: usize,
    pub seed: u64,
    pub horizon: Option<f64>,
    /// Fixed rk4 step.
    pub step: f64,
    /// Check a seeded random subset of this many parameters.
    pub max_params: Option<usize>,
}

pub const GRADCHECK_REL_TOL: f64 = 1e-3;
/// Entries with |adjoint| below this are compared absolutely.
pub const GRADCHECK_SMALL: f64 = 1e-8;
pub const GRADCHECK_ABS_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct EntryCheck {
    pub sample: usize,
    pub index: usize,
    pub adjoint: f64,
    pub fd: f64,
    pub rel: Option<f64>,
    pub abs: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockReport {
    pub name: String,
    pub entries: usize,
    pub max_rel: f64,
    /// Largest absolute error among entries compared absolutely.
    pub max_abs_small: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckReport {
    pub blocks: Vec<BlockReport>,
    pub entries: Vec<EntryCheck>,
    pub passed: bool,
}

/// Named contiguous parameter ranges.
pub fn parameter_blocks(spec: &ControllerSpec) -> Vec<(String, std::ops::Range<usize>)> {
    match &spec.controller {
        Controller::Quadratic(_) => vec![("K".into(), 0..3), ("G".into(), 3..6), ("B".into(), 6..12)],
        Controller::Nn(nn) => {
            let mut out = Vec::new();
            let mut k = 0;
            for (tag, net) in [("V", &nn.v_net), ("B", &nn.b_net)] {
                for (i, l) in net.layers.iter().enumerate() {
                    out.push((format!("{tag}.W{}", i + 1), k..k + l.w.len()));
                    k += l.w.len();
                    out.push((format!("{tag}.b{}", i + 1), k..k + l.b.len()));
                    k += l.b.len();
                }
            }
            out
        }
        Controller::Free => Vec::new(),
    }
}

pub fn compare(sample: usize, index: usize, adjoint: f64, fd: f64) -> EntryCheck {
    let abs = (adjoint - fd).abs();
    let (rel, passed) = if adjoint.abs() < GRADCHECK_SMALL {
        (None, abs < GRADCHECK_ABS_TOL)
    } else {
        let r = abs / adjoint.abs();
        (Some(r), r < GRADCHECK_REL_TOL)
    };
    EntryCheck { sample, index, adjoint, fd, rel, abs, passed: passed && fd.is_finite() }
}

pub fn gradcheck(args: &GradcheckArgs) -> Result<GradcheckReport, CliError> {
    if !(args.eps.is_finite() && args.eps > 0.0) {
        return Err(CliError::Input(format!("--eps must be > 0 (got {})", args.eps)));
    }
    if !(args.step.is_finite() && args.step > 0.0) {
        return Err(CliError::Input(format!("--step must be > 0 (got {})", args.step)));
    }
    let config = RunConfig::load(&args.config)?;
    let mut setup = config.build()?;
    if let Some(h) = args.horizon {
        if !(h.is_finite() && h >= 0.0) {
            return Err(CliError::Input(format!("--horizon must be finite and ≥ 0 (got {h})")));
        }
        setup.cost.horizon = h;
    }
    let solver = SolverConfig::rk4(args.step);
    let ctrl = &setup.controller;
    let n = ctrl.param_count();
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let states: Vec<ProductElement> = (0..args.samples).map(|_| sample_initial(&setup.sampler, &mut rng)).collect();
    let indices: Vec<usize> = match args.max_params {
        Some(k) if k < n => {
            let mut v = rand::seq::index::sample(&mut rng, n, k).into_vec();
            v.sort_unstable();
            v
        }
        _ => (0..n).collect(),
    };
    let theta = ctrl.params();

    let mut entries = Vec::new();
    for (s, g0) in states.iter().enumerate() {
        let adj = cost_and_gradient(&setup.cost, ctrl, &setup.body, g0, &solver)?;
        let fds: Vec<geonode::Result<f64>> = indices
            .par_iter()
            .map(|&i| {
                let at = |d: f64| -> geonode::Result<f64> {
                    let mut th = theta.clone();
                    th[i] += d;
                    Ok(cost(&setup.cost, &ctrl.with_params(&th)?, &setup.body, g0, &solver)?.cost)
                };
                Ok((at(args.eps)? - at(-args.eps)?) / (2.0 * args.eps))
            })
            .collect();
        for (&i, fd) in indices.iter().zip(fds) {
            entries.push(compare(s, i, adj.grad[i], fd?));
        }
    }

    let blocks: Vec<BlockReport> = parameter_blocks(ctrl)
        .into_iter()
        .filter_map(|(name, range)| {
            let mine: Vec<&EntryCheck> = entries.iter().filter(|e| range.contains(&e.index)).collect();
            (!mine.is_empty()).then(|| BlockReport {
                name,
                entries: mine.len(),
                max_rel: mine.iter().filter_map(|e| e.rel).fold(0.0, f64::max),
                max_abs_small: mine.iter().filter(|e| e.rel.is_none()).map(|e| e.abs).fold(0.0, f64::max),
                passed: mine.iter().all(|e| e.passed),
            })
        })
        .collect();
    let passed = entries.iter().all(|e| e.passed);
    Ok(GradcheckReport { blocks, entries, passed })
}

/// Human-readable per-block table.
pub fn format_gradcheck(report: &GradcheckReport) -> String {
    let mut s = format!("{:<8} {:>8} {:>14} {:>14}  status\n", "block", "entries", "max_rel_err", "max_abs_err");
    for b in &report.blocks {
        s += &format!(
            "{:<8} {:>8} {:>14.3e} {:>14.3e}  {}\n",
            b.name,
            b.entries,
            b.max_rel,
            b.max_abs_small,
            if b.passed { "PASS" } else { "FAIL" }
        );
    }
    s += &format!(
        "overall: {} (relative tolerance {GRADCHECK_REL_TOL:e}, entries below {GRADCHECK_SMALL:e} compared absolutely at {GRADCHECK_ABS_TOL:e})\n",
        if report.passed { "PASS" } else { "FAIL" }
    );
    s
}

/// The failing entries, worst first.
pub fn format_failures(report: &GradcheckReport, limit: usize) -> String {
    let mut bad: Vec<&EntryCheck> = report.entries.iter().filter(|e| !e.passed).collect();
    bad.sort_by(|a, b| b.rel.unwrap_or(b.abs).total_cmp(&a.rel.unwrap_or(a.abs)));
    let mut s = format!("{:>6} {:>6} {:>24} {:>24} {:>12}\n", "sample", "index", "adjoint", "finite_diff", "error");
    for e in bad.iter().take(limit) {
        s += &format!("{:>6} {:>6} {:>24.16e} {:>24.16e} {:>12.3e}\n", e.sample, e.index, e.adjoint, e.fd, e.rel.unwrap_or(e.abs));
    }
    s
}
