//! TOML run configuration.
//!
//! ```toml
//! [model]
//! alpha = 0.1
//! sigma2 = 1.0
//! t_final = 500.0
//!
//! [model.selection]
//! kind = "bimodal"
//! truncation_radius = 12.0
//!
//! [initial]
//! kind = "gaussian"
//! mean = 3.0
//!
//! [output]
//! directory = "out/tracking"
//! ```

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use infmodel::kernels::{Bump, SelectionTable};
use infmodel::{Backend, Density, Grid, ModelParams, SelectionFn};
use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub grid: GridConfig,
    pub initial: InitialConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub steady: SteadyConfig,
    #[serde(default, rename = "macro")]
    pub macro_: MacroConfig,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub alpha: f64,
    #[serde(default = "one")]
    pub sigma2: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub t_final: f64,
    #[serde(default)]
    pub backend: BackendConfig,
    pub selection: SelectionConfig,
}

#[derive(Debug, Clone, Copy, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum BackendConfig {
    #[default]
    Spectral,
    Direct,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SelectionConfig {
    /// `2e^{−(x−5)²/4} + e^{−(x+5)²/4}`
    Bimodal { truncation_radius: Option<f64> },
    Bumps {
        bumps: Vec<BumpConfig>,
        truncation_radius: Option<f64>,
        #[serde(default)]
        offset: f64,
    },
    Constant { value: f64 },
    /// Two-column `x,a` CSV, piecewise linear, zero outside its range.
    Table { path: PathBuf },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpConfig {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        let g = Grid::default();
        Self {
            x_min: g.x_min(),
            x_max: g.x_max(),
            n_points: g.n_points(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    /// Variance defaults to `2σ²`.
    Gaussian { mean: f64, variance: Option<f64> },
    Mixture { components: Vec<ComponentConfig> },
    /// `x,density` CSV on exactly the configured grid.
    Table { path: PathBuf },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentConfig {
    pub weight: f64,
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub directory: PathBuf,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    /// Absent means geometric times 1, 2, 4, …; empty means none.
    pub snapshot_times: Option<Vec<f64>>,
    #[serde(default = "default_true")]
    pub early_stop: bool,
    #[serde(default = "default_stop_tol")]
    pub stop_tol: f64,
    #[serde(default = "default_k")]
    pub quantile_k: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: default_dir(),
            record_every: default_record_every(),
            snapshot_times: None,
            early_stop: true,
            stop_tol: default_stop_tol(),
            quantile_k: default_k(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteadyConfig {
    /// Defaults to the mean of the initial condition.
    pub z_init: Option<f64>,
    #[serde(default = "default_fixed_tol")]
    pub fixed_tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "one")]
    pub damping: f64,
}

impl Default for SteadyConfig {
    fn default() -> Self {
        Self {
            z_init: None,
            fixed_tol: default_fixed_tol(),
            max_iter: default_max_iter(),
            damping: 1.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MacroConfig {
    #[serde(default = "default_search")]
    pub search: [f64; 2],
    #[serde(default = "default_dt_ode")]
    pub dt_ode: f64,
    /// Horizon of the ODE in its own time; defaults to `α·t_final`, or
    /// `t_final` when `α = 0`.
    pub t_final: Option<f64>,
}

impl Default for MacroConfig {
    fn default() -> Self {
        Self {
            search: default_search(),
            dt_ode: default_dt_ode(),
            t_final: None,
        }
    }
}

fn one() -> f64 {
    1.0
}
fn default_dt() -> f64 {
    ModelParams::DEFAULT_DT
}
fn default_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_record_every() -> usize {
    20
}
fn default_true() -> bool {
    true
}
fn default_stop_tol() -> f64 {
    1e-10
}
fn default_k() -> usize {
    infmodel::transport::DEFAULT_K
}
fn default_fixed_tol() -> f64 {
    1e-10
}
fn default_max_iter() -> usize {
    10_000
}
fn default_search() -> [f64; 2] {
    [-10.0, 10.0]
}
fn default_dt_ode() -> f64 {
    0.01
}

fn invalid(what: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{what}: {e}"))
}

impl RunConfig {
    /// Parses a config file. Relative table paths are resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(CliError::io(path))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let SelectionConfig::Table { path } = &mut self.model.selection {
            fix(path);
        }
        if let InitialConfig::Table { path } = &mut self.initial {
            fix(path);
        }
    }

    /// Every numeric bound that can be checked without touching the disk.
    pub fn validate(&self) -> Result<()> {
        if !matches!(self.model.selection, SelectionConfig::Table { .. }) {
            self.model_params()?;
        }
        self.grid()?;
        if self.output.record_every == 0 {
            return Err(invalid("output.record_every", "must be ≥ 1"));
        }
        if self.output.quantile_k < infmodel::transport::MIN_K {
            return Err(invalid(
                "output.quantile_k",
                format!("must be ≥ {}", infmodel::transport::MIN_K),
            ));
        }
        if !(self.output.stop_tol > 0.0) {
            return Err(invalid("output.stop_tol", "must be > 0"));
        }
        if let Some(ts) = &self.output.snapshot_times {
            if ts.iter().any(|t| !(*t >= 0.0)) {
                return Err(invalid("output.snapshot_times", "times must be ≥ 0"));
            }
        }
        if let InitialConfig::Gaussian { variance: Some(v), .. } = self.initial {
            if !(v > 0.0) {
                return Err(invalid("initial.variance", "must be > 0"));
            }
        }
        if let InitialConfig::Mixture { components } = &self.initial {
            if components.is_empty() {
                return Err(invalid("initial.components", "need at least one component"));
            }
            for c in components {
                if !(c.weight > 0.0) || !(c.variance > 0.0) {
                    return Err(invalid(
                        "initial.components",
                        "weights and variances must be > 0",
                    ));
                }
            }
        }
        let s = &self.steady;
        if !(s.fixed_tol > 0.0) || s.max_iter == 0 || !(s.damping > 0.0 && s.damping <= 1.0) {
            return Err(invalid(
                "steady",
                "need fixed_tol > 0, max_iter ≥ 1 and damping in (0, 1]",
            ));
        }
        let m = &self.macro_;
        if !(m.search[0] < m.search[1]) || !(m.dt_ode > 0.0) {
            return Err(invalid("macro", "need search = [lo, hi] with lo < hi and dt_ode > 0"));
        }
        if let Some(t) = m.t_final {
            if !(t >= 0.0) {
                return Err(invalid("macro.t_final", "must be ≥ 0"));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        let g = self.grid;
        Grid::new(g.x_min, g.x_max, g.n_points).map_err(|e| invalid("grid", e))
    }

    pub fn selection(&self) -> Result<SelectionFn> {
        let what = "model.selection";
        match &self.model.selection {
            SelectionConfig::Bimodal { truncation_radius } => SelectionFn::bimodal()
                .with_truncation(*truncation_radius)
                .map_err(|e| invalid(what, e)),
            SelectionConfig::Bumps {
                bumps,
                truncation_radius,
                offset,
            } => SelectionFn::new(
                bumps
                    .iter()
                    .map(|b| Bump {
                        amplitude: b.amplitude,
                        center: b.center,
                        width: b.width,
                    })
                    .collect(),
                *truncation_radius,
            )
            .and_then(|s| s.with_offset(*offset))
            .map_err(|e| invalid(what, e)),
            SelectionConfig::Constant { value } => {
                SelectionFn::constant(*value).map_err(|e| invalid(what, e))
            }
            SelectionConfig::Table { path } => {
                let text = fs::read_to_string(path).map_err(CliError::io(path))?;
                let (xs, vs) = parse_table(&text).map_err(|e| invalid(what, e))?;
                let table = SelectionTable::new(xs, vs).map_err(|e| invalid(what, e))?;
                Ok(SelectionFn::from_table(table))
            }
        }
    }

    pub fn model_params(&self) -> Result<ModelParams> {
        let m = &self.model;
        ModelParams::new(m.alpha, m.sigma2, self.selection()?, m.dt, m.t_final)
            .map_err(|e| invalid("model", e))
    }

    pub fn backend(&self) -> Backend {
        match self.model.backend {
            BackendConfig::Spectral => Backend::Spectral,
            BackendConfig::Direct => Backend::Direct,
        }
    }

    pub fn initial_density(&self) -> Result<Density> {
        let grid = self.grid()?;
        let what = "initial";
        match &self.initial {
            InitialConfig::Gaussian { mean, variance } => {
                let v = variance.unwrap_or(2.0 * self.model.sigma2);
                Density::gaussian(grid, *mean, v).map_err(|e| invalid(what, e))
            }
            InitialConfig::Mixture { components } => {
                let comps: Vec<_> = components
                    .iter()
                    .map(|c| (c.weight, c.mean, c.variance))
                    .collect();
                Density::gaussian_mixture(grid, &comps).map_err(|e| invalid(what, e))
            }
            InitialConfig::Table { path } => {
                let file = fs::File::open(path).map_err(CliError::io(path))?;
                let d = Density::read_csv(BufReader::new(file)).map_err(|e| invalid(what, e))?;
                if *d.grid() != grid {
                    return Err(invalid(
                        what,
                        format!("{} does not lie on the configured grid", path.display()),
                    ));
                }
                Ok(d)
            }
        }
    }

    /// Mean of the initial condition, without building it when it is given
    /// in closed form.
    pub fn initial_mean(&self) -> Result<f64> {
        match &self.initial {
            InitialConfig::Gaussian { mean, .. } => Ok(*mean),
            _ => Ok(self.initial_density()?.mean()),
        }
    }

    /// The same config started at mean `z0`: Gaussian starts move their
    /// centre, mixtures are translated rigidly.
    pub fn with_initial_mean(&self, z0: f64) -> Result<Self> {
        let mut cfg = self.clone();
        match &mut cfg.initial {
            InitialConfig::Gaussian { mean, .. } => *mean = z0,
            InitialConfig::Mixture { components } => {
                let total: f64 = components.iter().map(|c| c.weight).sum();
                let current = components.iter().map(|c| c.weight * c.mean).sum::<f64>() / total;
                for c in components.iter_mut() {
                    c.mean += z0 - current;
                }
            }
            InitialConfig::Table { .. } => {
                return Err(invalid("sweep.z0", "cannot move a tabulated initial condition"));
            }
        }
        Ok(cfg)
    }
}

fn parse_table(text: &str) -> std::result::Result<(Vec<f64>, Vec<f64>), String> {
    let mut xs = Vec::new();
    let mut vs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (i == 0 && line.starts_with(|c: char| c.is_alphabetic())) {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 2 {
            return Err(format!("line {}: expected two columns", i + 1));
        }
        let parse = |s: &str| s.parse::<f64>().map_err(|e| format!("line {}: {e}", i + 1));
        xs.push(parse(cols[0])?);
        vs.push(parse(cols[1])?);
    }
    Ok((xs, vs))
}

/// Parameter grid for `sweep`. Every list defaults to the base config value.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub alpha: Vec<f64>,
    #[serde(default)]
    pub z0: Vec<f64>,
    #[serde(default)]
    pub sigma2: Vec<f64>,
}

/// One sweep point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Combination {
    pub alpha: f64,
    pub z0: f64,
    pub sigma2: f64,
}

impl SweepSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(CliError::io(path))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))
    }

    /// Cartesian product in `alpha`, `z0`, `sigma2` order with duplicates
    /// removed (first occurrence kept).
    pub fn combinations(&self, base: &RunConfig) -> Result<Vec<Combination>> {
        let or = |v: &Vec<f64>, d: f64| if v.is_empty() { vec![d] } else { v.clone() };
        let alphas = or(&self.alpha, base.model.alpha);
        let z0s = or(&self.z0, base.initial_mean()?);
        let sigmas = or(&self.sigma2, base.model.sigma2);
        let mut out: Vec<Combination> = Vec::new();
        for &alpha in &alphas {
            for &z0 in &z0s {
                for &sigma2 in &sigmas {
                    let c = Combination { alpha, z0, sigma2 };
                    let key = |c: &Combination| (c.alpha.to_bits(), c.z0.to_bits(), c.sigma2.to_bits());
                    if !out.iter().any(|o| key(o) == key(&c)) {
                        out.push(c);
                    }
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [model]
        alpha = 0.1
        t_final = 10.0
        [model.selection]
        kind = "bimodal"
        truncation_radius = 12.0
        [initial]
        kind = "gaussian"
        mean = 3.0
    "#;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.model.sigma2, 1.0);
        assert_eq!(cfg.model.dt, 0.05);
        assert_eq!(cfg.grid().unwrap(), Grid::default());
        assert_eq!(cfg.output.record_every, 20);
        let n = cfg.initial_density().unwrap();
        assert!((n.variance() - 2.0).abs() < 1e-8);
    }

    #[test]
    fn missing_field_is_named() {
        let text = MINIMAL.replace("t_final = 10.0", "");
        match RunConfig::parse(&text) {
            Err(CliError::Config(msg)) => assert!(msg.contains("t_final"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_field_rejected() {
        let text = MINIMAL.replace("alpha = 0.1", "alpha = 0.1\nbeta = 2");
        assert!(matches!(RunConfig::parse(&text), Err(CliError::Config(_))));
    }

    #[test]
    fn bounds_checked_at_parse_time() {
        for (from, to) in [
            ("alpha = 0.1", "alpha = -0.1"),
            ("t_final = 10.0", "t_final = 10.0\ndt = 0.9"),
            ("mean = 3.0", "mean = 3.0\nvariance = 0.0"),
        ] {
            let text = MINIMAL.replace(from, to);
            assert!(matches!(RunConfig::parse(&text), Err(CliError::Config(_))), "{to}");
        }
        let text = format!("{MINIMAL}\n[grid]\nx_min = -20\nx_max = 20\nn_points = 1000\n");
        assert!(matches!(RunConfig::parse(&text), Err(CliError::Config(_))));
    }

    #[test]
    fn sweep_deduplicates() {
        let base = RunConfig::parse(MINIMAL).unwrap();
        let spec: SweepSpec = toml::from_str("alpha = [0.2, 0.1, 0.2]\nz0 = [-10.0, 0.0, 10.0, 0.0]").unwrap();
        let combos = spec.combinations(&base).unwrap();
        assert_eq!(combos.len(), 6);
        assert!(combos.iter().all(|c| c.sigma2 == 1.0));
    }

    #[test]
    fn mixture_translation_moves_mean() {
        let text = MINIMAL.replace(
            "kind = \"gaussian\"\n        mean = 3.0",
            "kind = \"mixture\"\ncomponents = [{ weight = 1.0, mean = -1.0, variance = 1.0 }, { weight = 3.0, mean = 2.0, variance = 0.5 }]",
        );
        let cfg = RunConfig::parse(&text).unwrap().with_initial_mean(4.0).unwrap();
        assert!((cfg.initial_density().unwrap().mean() - 4.0).abs() < 1e-8);
    }
}
