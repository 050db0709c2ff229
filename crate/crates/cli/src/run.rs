//! `simulate`, `sweep`, `steady` and `macro`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use infmodel::dynamics::{simulate, SimOptions, Snapshots, TrajectoryRecord};
use infmodel::macroscale::{MacroField, OdeSeries, RootReport, ROOT_TOL};
use infmodel::steady::{solve_steady, SteadyOptions, SteadyResult};
use infmodel::ReproPlan;
use rayon::prelude::*;

use crate::config::{Combination, RunConfig, SweepSpec};
use crate::error::{CliError, Result};

/// Environment variable holding the sweep worker count.
pub const WORKERS_ENV: &str = "INFMODEL_WORKERS";

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let file = File::create(path).map_err(CliError::io(path))?;
    let mut out = BufWriter::new(file);
    f(&mut out).and_then(|_| out.flush()).map_err(CliError::io(path))
}

pub fn plan_for(cfg: &RunConfig) -> Result<ReproPlan> {
    ReproPlan::with_backend(cfg.grid()?, cfg.model.sigma2, cfg.backend())
        .map_err(|e| CliError::Config(format!("model: {e}")))
}

#[derive(Debug, Clone)]
pub struct SimulateSummary {
    pub directory: PathBuf,
    pub z0: f64,
    pub terminal_z: f64,
    pub terminal_w2_to_gaussian: f64,
    pub sup_macro_error: f64,
    pub steps: usize,
    pub stopped_early: bool,
}

impl std::fmt::Display for SimulateSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "Z0 = {:.6}  Z(T) = {:.6}  W2(n, Gaussian) = {:.3e}  sup|Z - Y(at)| = {:.3e}  steps = {}{}",
            self.z0,
            self.terminal_z,
            self.terminal_w2_to_gaussian,
            self.sup_macro_error,
            self.steps,
            if self.stopped_early { " (stationary)" } else { "" }
        )
    }
}

fn sim_options(cfg: &RunConfig) -> SimOptions {
    let out = &cfg.output;
    SimOptions {
        record_every: out.record_every,
        stop_tol: out.early_stop.then_some(out.stop_tol),
        snapshots: match &out.snapshot_times {
            None => Snapshots::Geometric,
            Some(ts) if ts.is_empty() => Snapshots::None,
            Some(ts) => Snapshots::At(ts.clone()),
        },
        keep_states: false,
        reference: None,
        quantile_k: out.quantile_k,
    }
}

/// Simulates one configuration and writes `trajectory.csv`, `macro.csv`
/// and `snapshots/density_t<time>.csv` into the output directory.
pub fn run_simulate(cfg: &RunConfig) -> Result<SimulateSummary> {
    let params = cfg.model_params()?;
    let plan = plan_for(cfg)?;
    let n0 = cfg.initial_density()?;
    let rec = simulate(&n0, &params, &plan, &sim_options(cfg))?;
    let field = MacroField::new(params.sigma2, params.selection.clone())?;
    let comparison = field.compare_macro(&rec, params.alpha)?;

    let dir = &cfg.output.directory;
    create_dir(dir)?;
    write_file(&dir.join("trajectory.csv"), |w| rec.write_csv(w))?;
    write_file(&dir.join("macro.csv"), |w| comparison.write_csv(w))?;
    write_snapshots(dir, &rec)?;
    Ok(SimulateSummary {
        directory: dir.clone(),
        z0: rec.z[0],
        terminal_z: rec.terminal_z(),
        terminal_w2_to_gaussian: *rec.w2_to_gaussian.last().unwrap_or(&f64::NAN),
        sup_macro_error: comparison.sup_error,
        steps: rec.steps,
        stopped_early: rec.stopped_early,
    })
}

fn write_snapshots(dir: &Path, rec: &TrajectoryRecord) -> Result<()> {
    if rec.snapshots.is_empty() {
        return Ok(());
    }
    let snap_dir = dir.join("snapshots");
    create_dir(&snap_dir)?;
    for (t, density) in &rec.snapshots {
        let path = snap_dir.join(format!("density_t{t:.3}.csv"));
        write_file(&path, |w| density.write_csv(w))?;
    }
    Ok(())
}

/// Worker count from [`WORKERS_ENV`], defaulting to the available cores.
pub fn worker_count() -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::Config(format!(
                "{WORKERS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub run: usize,
    pub combination: Combination,
    pub outcome: std::result::Result<SimulateSummary, String>,
}

#[derive(Debug, Clone)]
pub struct SweepSummary {
    pub index: PathBuf,
    pub rows: Vec<SweepRow>,
}

impl SweepSummary {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.outcome.is_err()).count()
    }
}

/// One simulation per distinct parameter combination, each in
/// `<directory>/run_<nnn>`, plus `<directory>/index.csv`. Failed runs are
/// recorded in the index and do not stop the others.
pub fn run_sweep(base: &RunConfig, spec: &SweepSpec, workers: usize) -> Result<SweepSummary> {
    let combos = spec.combinations(base)?;
    let root = base.output.directory.clone();
    create_dir(&root)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        combos
            .par_iter()
            .enumerate()
            .map(|(run, c)| {
                let outcome = sweep_config(base, c, &root.join(format!("run_{run:03}")))
                    .and_then(|cfg| run_simulate(&cfg))
                    .map_err(|e| e.to_string());
                SweepRow {
                    run,
                    combination: *c,
                    outcome,
                }
            })
            .collect()
    });
    let index = root.join("index.csv");
    write_file(&index, |w| {
        writeln!(
            w,
            "run,alpha,z0,sigma2,status,terminal_z,w2_to_gaussian,sup_macro_error,steps,stopped_early,message"
        )?;
        for r in &rows {
            let c = r.combination;
            match &r.outcome {
                Ok(s) => writeln!(
                    w,
                    "{},{},{},{},ok,{},{},{},{},{},",
                    r.run,
                    c.alpha,
                    c.z0,
                    c.sigma2,
                    s.terminal_z,
                    s.terminal_w2_to_gaussian,
                    s.sup_macro_error,
                    s.steps,
                    s.stopped_early
                )?,
                Err(msg) => writeln!(
                    w,
                    "{},{},{},{},failed,,,,,,\"{}\"",
                    r.run,
                    c.alpha,
                    c.z0,
                    c.sigma2,
                    msg.replace('"', "'")
                )?,
            }
        }
        Ok(())
    })?;
    Ok(SweepSummary { index, rows })
}

fn sweep_config(base: &RunConfig, c: &Combination, dir: &Path) -> Result<RunConfig> {
    let mut cfg = base.with_initial_mean(c.z0)?;
    cfg.model.alpha = c.alpha;
    cfg.model.sigma2 = c.sigma2;
    cfg.output.directory = dir.to_path_buf();
    cfg.validate()?;
    Ok(cfg)
}

/// Writes `steady_density.csv` and `steady_residuals.csv`.
pub fn run_steady(cfg: &RunConfig) -> Result<SteadyResult> {
    let params = cfg.model_params()?;
    let plan = plan_for(cfg)?;
    let z_init = match cfg.steady.z_init {
        Some(z) => z,
        None => cfg.initial_mean()?,
    };
    let opts = SteadyOptions {
        fixed_tol: cfg.steady.fixed_tol,
        max_iter: cfg.steady.max_iter,
        damping: cfg.steady.damping,
        quantile_k: cfg.output.quantile_k,
    };
    let result = solve_steady(&params, &plan, z_init, &opts)?;
    let dir = &cfg.output.directory;
    create_dir(dir)?;
    write_file(&dir.join("steady_density.csv"), |w| result.density.write_csv(w))?;
    write_file(&dir.join("steady_residuals.csv"), |w| {
        writeln!(w, "iteration,residual")?;
        for (i, r) in result.history.iter().enumerate() {
            writeln!(w, "{},{}", i + 1, r)?;
        }
        Ok(())
    })?;
    Ok(result)
}

#[derive(Debug, Clone)]
pub struct MacroSummary {
    pub roots: RootReport,
    pub ode: OdeSeries,
    pub y0: f64,
}

/// Roots of `F` on the configured interval (`roots.csv`) and the ODE path
/// from the initial mean (`macro_ode.csv`).
pub fn run_macro(cfg: &RunConfig) -> Result<MacroSummary> {
    let selection = cfg.selection()?;
    let field = MacroField::new(cfg.model.sigma2, selection)?;
    let [lo, hi] = cfg.macro_.search;
    let roots = field.find_roots(lo, hi, ROOT_TOL)?;
    let y0 = cfg.initial_mean()?;
    let horizon = cfg.macro_.t_final.unwrap_or(if cfg.model.alpha > 0.0 {
        cfg.model.alpha * cfg.model.t_final
    } else {
        cfg.model.t_final
    });
    let ode = field.ode_solve(y0, horizon, cfg.macro_.dt_ode)?;
    let dir = &cfg.output.directory;
    create_dir(dir)?;
    write_file(&dir.join("roots.csv"), |w| roots.write_csv(w))?;
    write_file(&dir.join("macro_ode.csv"), |w| ode.write_csv(w))?;
    Ok(MacroSummary { roots, ode, y0 })
}
