//! Experiment execution, CSV/manifest emission and reference verification.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use walklab_core::bpre::{
    martingale_w_track, minus_measure_expectation, plus_measure_expectation, survival_curve, survival_report,
    EnvironmentModel, One,
};
use walklab_core::functionals::{run_ratio_experiment, RatioParams};
use walklab_core::renewal::{estimate_u, estimate_v, uniform_grid};
use walklab_core::{Budget, Error, Estimate, IncrementModel, RandomStream, RenewalSet};

use crate::config::{parse_config, ConfigError, ExperimentConfig, ExperimentKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_BUDGET: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Core(Error::BudgetRefused { .. }) => EXIT_BUDGET,
            _ => EXIT_FAILURE,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    /// Worker threads; `None` uses every core.
    pub workers: Option<usize>,
    pub seed: Option<u64>,
}

/// Files produced by one run, as (file name, contents).
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub csv_name: String,
    pub csv: String,
    /// Extra `key = value` lines for the manifest.
    pub notes: Vec<(String, String)>,
}

pub fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig, RunError> {
    let text = fs::read_to_string(path).map_err(|e| RunError::Io(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = parse_config(&text)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

/// Creates `dir` and proves it is writable.
fn check_writable(dir: &Path) -> Result<(), RunError> {
    fs::create_dir_all(dir).map_err(|e| RunError::Io(format!("cannot create {}: {e}", dir.display())))?;
    tempfile::NamedTempFile::new_in(dir)
        .map(drop)
        .map_err(|e| RunError::Io(format!("output directory {} is not writable: {e}", dir.display())))
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool, RunError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        if w == 0 {
            return Err(RunError::Usage("--workers must be >= 1".into()));
        }
        b = b.num_threads(w);
    }
    b.build().map_err(|e| RunError::Usage(format!("thread pool: {e}")))
}

/// Runs a validated config inside a pool of `workers` threads, without touching the disk.
pub fn execute(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<RunOutput, RunError> {
    pool(workers)?.install(|| compute(cfg))
}

/// Parses, checks the subcommand and output directory, runs, and writes
/// `<experiment>.csv` and `manifest.txt`. Returns the output directory.
pub fn run(subcommand: &str, config_path: &Path, opts: &RunOptions) -> Result<PathBuf, RunError> {
    let cfg = load_config(config_path, opts.seed)?;
    if cfg.experiment.subcommand() != subcommand {
        return Err(RunError::Usage(format!(
            "experiment `{}` runs under `{}`, not `{subcommand}`",
            cfg.experiment.name(),
            cfg.experiment.subcommand()
        )));
    }
    let dir = opts
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| RunError::Usage("no output directory: pass --out or set `output`".into()))?;
    check_writable(&dir)?;
    let start = Instant::now();
    let out = execute(&cfg, opts.workers)?;
    let wall = start.elapsed().as_secs_f64();
    write(&dir.join(&out.csv_name), &out.csv)?;
    let workers = opts.workers.unwrap_or_else(rayon::current_num_threads);
    write(&dir.join("manifest.txt"), &manifest(&cfg, &out, workers, wall))?;
    Ok(dir)
}

fn write(path: &Path, text: &str) -> Result<(), RunError> {
    fs::write(path, text).map_err(|e| RunError::Io(format!("cannot write {}: {e}", path.display())))
}

pub fn manifest(cfg: &ExperimentConfig, out: &RunOutput, workers: usize, wall_seconds: f64) -> String {
    let mut m = String::new();
    let _ = writeln!(m, "experiment = {}", cfg.experiment.name());
    let _ = writeln!(m, "config_digest = {}", cfg.digest());
    let _ = writeln!(m, "seed = {}", cfg.seed);
    let _ = writeln!(m, "version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(m, "workers = {workers}");
    let _ = writeln!(m, "wall_time_s = {wall_seconds:.3}");
    let _ = writeln!(m, "csv = {}", out.csv_name);
    for (k, v) in &out.notes {
        let _ = writeln!(m, "{k} = {v}");
    }
    for line in cfg.echo().lines() {
        let _ = writeln!(m, "config.{line}");
    }
    m
}

fn fixed_replicas(cfg: &ExperimentConfig) -> Result<u64, RunError> {
    match cfg.budget {
        Budget::Fixed(r) => Ok(r),
        Budget::Auto { .. } => Err(RunError::Usage(format!("`{}` needs a fixed replica count", cfg.experiment.name()))),
    }
}

fn tables(cfg: &ExperimentConfig, model: &IncrementModel<f64>, root: &RandomStream) -> Result<RenewalSet, RunError> {
    let grid = uniform_grid(cfg.table.step, cfg.table.max);
    Ok(RenewalSet::estimate(model, &grid, cfg.table.replicas, cfg.table.n_max, &root.derive("renewal"))?)
}

fn estimate_row(out: &mut String, quantity: &str, x: f64, n: u64, e: &Estimate) {
    let _ = writeln!(out, "{quantity},{x},{n},{},{},{},{}", e.value, e.stderr, e.replicas, e.seed);
}

fn compute(cfg: &ExperimentConfig) -> Result<RunOutput, RunError> {
    let model = cfg.model.build()?;
    let root = RandomStream::from_seed(cfg.seed);
    let name = cfg.experiment.name();
    let csv_name = format!("{name}.csv");
    let mut notes = Vec::new();
    let csv = match cfg.experiment {
        ExperimentKind::Density => {
            let p = model.attraction();
            let mut out = String::from("x,density,density_abs_error,cdf,cdf_abs_error\n");
            for &x in &cfg.x_grid {
                let d = p.density(x)?;
                let f = p.cdf(x)?;
                let _ = writeln!(out, "{x},{},{:e},{},{:e}", d.value, d.abs_error, f.value, f.abs_error);
            }
            notes.push(("alpha".into(), p.alpha().to_string()));
            notes.push(("beta".into(), p.beta().to_string()));
            notes.push(("c".into(), p.c().to_string()));
            notes.push(("density_at_zero".into(), p.density_at_zero()?.to_string()));
            notes.push(("rho".into(), p.positivity_rho()?.to_string()));
            out
        }
        ExperimentKind::Renewal => {
            let set = tables(cfg, &model, &root)?;
            let mut out = set.u.to_csv();
            for t in [&set.v, &set.v0] {
                out.extend(t.to_csv().lines().skip(1).map(|l| format!("{l}\n")));
            }
            for t in [&set.u, &set.v, &set.v0] {
                if let Some(note) = &t.tail_fit_note {
                    notes.push((format!("{}_tail_fit", t.which.name()), note.clone()));
                }
            }
            out
        }
        ExperimentKind::Theorem(id) => {
            let set = tables(cfg, &model, &root)?;
            let params = RatioParams { theta: cfg.theta, constraint: cfg.constraint, x: cfg.x, k: cfg.k };
            let report = run_ratio_experiment(id, &model, &params, &cfg.n_grid, cfg.budget, &set, &root)?;
            notes.push(("drift_toward_one".into(), report.drift_toward_one().to_string()));
            report.to_csv()
        }
        ExperimentKind::BpreSurvival => {
            let env = EnvironmentModel::new(cfg.offspring, model);
            let report = survival_report(&env, &cfg.n_grid, cfg.k, fixed_replicas(cfg)?, cfg.j, &root)?;
            for r in &report.rows {
                notes.push((format!("middle_share.n={}", r.n), r.middle_share().to_string()));
                notes.push((format!("bound.n={}", r.n), format!("{} +- {}", r.bound.value, r.bound.stderr)));
            }
            report.to_csv()
        }
        ExperimentKind::BpreUnconstrained => {
            let env = EnvironmentModel::new(cfg.offspring, model);
            let curve = survival_curve(&env, &cfg.n_grid, fixed_replicas(cfg)?, &root.derive("unconstrained"))?;
            let mut out = String::from("n,survival,stderr,replicas,seed\n");
            for (n, e) in curve.n_grid.iter().zip(&curve.survival) {
                let _ = writeln!(out, "{n},{},{},{},{}", e.value, e.stderr, e.replicas, e.seed);
            }
            if curve.n_grid.len() >= 2 {
                notes.push(("log_log_slope".into(), curve.log_log_slope().to_string()));
            }
            notes.push(("negative_share".into(), curve.negative_share.to_string()));
            notes.push(("capped_frac".into(), curve.capped_frac.to_string()));
            out
        }
        ExperimentKind::HplusCheck => {
            let replicas = fixed_replicas(cfg)?;
            let grid = uniform_grid(cfg.table.step, cfg.table.max);
            let neg: Vec<f64> = grid.iter().map(|y| -y).collect();
            let ts = root.derive("renewal");
            let u = estimate_u(&model, &grid, cfg.table.replicas, cfg.table.n_max, &ts)?;
            let v = estimate_v(&model, &neg, cfg.table.replicas, cfg.table.n_max, &ts)?;
            let mut out = String::from("quantity,x,n,value,stderr,replicas,seed\n");
            let (xp, xm) = (-cfg.x, cfg.x);
            for &n in &cfg.n_grid {
                let s = root.derive(&format!("hplus/n={n}"));
                let e = plus_measure_expectation(&model, &One, xp, n, replicas, &u, &s.derive("plus"))?;
                estimate_row(&mut out, "plus", xp, n, &e);
                let e = minus_measure_expectation(&model, &One, xm, n, replicas, &v, &s.derive("minus"))?;
                estimate_row(&mut out, "minus", xm, n, &e);
            }
            let env = EnvironmentModel::new(cfg.offspring, model);
            let track = martingale_w_track(&env, xp, &cfg.checkpoints, replicas, &u, &root.derive("w"))?;
            for (j, e) in track.checkpoints.iter().zip(&track.means) {
                estimate_row(&mut out, "w", xp, *j, e);
            }
            let last = *track.checkpoints.last().expect("validated nonempty");
            estimate_row(&mut out, "w_positive", xp, last, &track.positive_share);
            out
        }
    };
    Ok(RunOutput { csv_name, csv, notes })
}

/// Outcome of comparing one committed file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FileCheck {
    pub reference: String,
    pub file: String,
    pub matches: bool,
}

/// Reruns every `<name>.conf` in `dir` and compares the produced CSV with
/// `dir/<name>/<experiment>.csv` byte for byte.
pub fn verify_reference(dir: &Path, workers: Option<usize>) -> Result<Vec<FileCheck>, RunError> {
    let mut confs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| RunError::Io(format!("cannot list {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "conf"))
        .collect();
    confs.sort();
    if confs.is_empty() {
        return Err(RunError::Usage(format!("no .conf files in {}", dir.display())));
    }
    let mut checks = Vec::new();
    for conf in confs {
        let stem = conf.file_stem().expect("has extension").to_string_lossy().into_owned();
        let cfg = load_config(&conf, None)?;
        let out = execute(&cfg, workers)?;
        let committed = dir.join(&stem).join(&out.csv_name);
        let expected = fs::read(&committed)
            .map_err(|e| RunError::Io(format!("cannot read {}: {e}", committed.display())))?;
        checks.push(FileCheck { reference: stem, file: out.csv_name, matches: expected == out.csv.as_bytes() });
    }
    Ok(checks)
}
