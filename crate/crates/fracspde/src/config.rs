//! Experiment configuration.
//!
//! A config file is a JSON object. Every key is optional and unknown keys
//! are rejected. Resolution fills in defaults, applies command-line
//! overrides and drops the option blocks of other commands, and the
//! resolved config is what `manifest.json` contains. Running from a
//! manifest therefore reproduces a run.
//!
//! ```json
//! {
//!   "command": "simulate",
//!   "params": { "beta": 1.0, "alpha": 2.0, "nu": 1.0, "d": 1 },
//!   "grid": { "x_min": -8.0, "x_max": 8.0, "nx": 256, "t_max": 1.0, "nt": 64,
//!             "boundary": "periodic" },
//!   "nonlinearity": { "kind": "linear", "lambda": 1.0 },
//!   "initial": { "kind": "constant", "value": 1.0 },
//!   "seed": 8,
//!   "replicas": 10000,
//!   "output_dir": "out",
//!   "tolerances": { "oracle_se": 3.0 },
//!   "simulate": { "record_x": [-2.0, -1.0, 0.0, 1.0, 2.0], "moments": [1, 2], "epsilon": 0.5 }
//! }
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use fracspde_core::spde_sim::front_bounds;
use fracspde_core::{Boundary, ModelParams, NonlinearitySpec, SimulationSpec, SpaceTimeGrid};
use serde::{Deserialize, Serialize};

use crate::verify::Suite;
use crate::RunError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Ml,
    Kernel,
    Renewal,
    Simulate,
    Fronts,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Ml => "ml",
            Command::Kernel => "kernel",
            Command::Renewal => "renewal",
            Command::Simulate => "simulate",
            Command::Fronts => "fronts",
            Command::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsConfig {
    pub beta: f64,
    pub alpha: f64,
    pub nu: f64,
    pub d: u32,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            alpha: 2.0,
            nu: 1.0,
            d: 1,
        }
    }
}

impl ParamsConfig {
    pub fn model(&self) -> Result<ModelParams, RunError> {
        ModelParams::new(self.beta, self.alpha, self.nu, self.d).map_err(|e| RunError::Config(format!("params: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryConfig {
    ZeroPadded,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub t_max: f64,
    pub nt: usize,
    pub boundary: BoundaryConfig,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            x_min: -8.0,
            x_max: 8.0,
            nx: 256,
            t_max: 1.0,
            nt: 64,
            boundary: BoundaryConfig::ZeroPadded,
        }
    }
}

impl GridConfig {
    pub fn grid(&self) -> Result<SpaceTimeGrid, RunError> {
        let b = match self.boundary {
            BoundaryConfig::ZeroPadded => Boundary::ZeroPadded,
            BoundaryConfig::Periodic => Boundary::Periodic,
        };
        SpaceTimeGrid::new(self.x_min, self.x_max, self.nx, self.t_max, self.nt, b)
            .map_err(|e| RunError::Config(format!("grid: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NonlinearityConfig {
    /// `σ(u) = λu`.
    Linear { lambda: f64 },
    /// Piecewise-linear through `(knots, values)`.
    Sampled { knots: Vec<f64>, values: Vec<f64> },
}

impl Default for NonlinearityConfig {
    fn default() -> Self {
        NonlinearityConfig::Linear { lambda: 1.0 }
    }
}

impl NonlinearityConfig {
    pub fn spec(&self) -> Result<NonlinearitySpec, RunError> {
        let s = match self {
            NonlinearityConfig::Linear { lambda } => NonlinearitySpec::linear(*lambda),
            NonlinearityConfig::Sampled { knots, values } => NonlinearitySpec::sampled(knots.clone(), values.clone()),
        };
        s.map_err(|e| RunError::Config(format!("nonlinearity: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    Constant { value: f64 },
    /// `value` on `[lo, hi]`, zero elsewhere.
    Indicator { lo: f64, hi: f64, value: f64 },
    /// One value per cell centre.
    Samples { values: Vec<f64> },
}

impl InitialConfig {
    pub fn field(&self, grid: &SpaceTimeGrid) -> Result<Vec<f64>, RunError> {
        let u0 = match self {
            InitialConfig::Constant { value } => vec![*value; grid.nx],
            InitialConfig::Indicator { lo, hi, value } => {
                if !(lo < hi) {
                    return Err(RunError::Config(format!("initial: need lo < hi, got [{lo}, {hi}]")));
                }
                grid.xs()
                    .iter()
                    .map(|x| if x >= lo && x <= hi { *value } else { 0.0 })
                    .collect()
            }
            InitialConfig::Samples { values } => {
                if values.len() != grid.nx {
                    return Err(RunError::Config(format!(
                        "initial: {} samples for {} cells",
                        values.len(),
                        grid.nx
                    )));
                }
                values.clone()
            }
        };
        if u0.iter().any(|v| !v.is_finite()) {
            return Err(RunError::Config("initial: values must be finite".into()));
        }
        Ok(u0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlOptions {
    pub betas: Vec<f64>,
    /// `E_β(-x)` is tabulated at `x = k x_max / points`, `k = 1..=points`.
    pub x_max: f64,
    pub points: usize,
}

impl Default for MlOptions {
    fn default() -> Self {
        Self {
            betas: (1..=9).map(|k| k as f64 / 10.0).collect(),
            x_max: 50.0,
            points: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelOptions {
    /// Rows at `t_i = i dt`, `i = 1..=nt`.
    pub dt: f64,
    pub nt: usize,
    /// Offsets `j dx`, `|j| ≤ nx`.
    pub dx: f64,
    pub nx: usize,
}

impl Default for KernelOptions {
    fn default() -> Self {
        Self {
            dt: 0.25,
            nt: 4,
            dx: 0.05,
            nx: 240,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenewalOptions {
    /// Constant forcing `a`.
    pub a: f64,
    pub b: f64,
    pub theta: f64,
    /// Defaults to `8/c`.
    pub t_max: Option<f64>,
    pub points: usize,
}

impl Default for RenewalOptions {
    fn default() -> Self {
        Self {
            a: 1.0,
            b: 1.0,
            theta: 0.5,
            t_max: None,
            points: 65,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateOptions {
    /// Positions of the recorded cells (nearest centre).
    pub record_x: Vec<f64>,
    pub moments: Vec<u32>,
    /// `ε` of the energy bound.
    pub epsilon: f64,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        Self {
            record_x: vec![-2.0, -1.0, 0.0, 1.0, 2.0],
            moments: vec![1, 2],
            epsilon: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrontsOptions {
    /// Defaults to `0.1`, the threshold and twice the threshold.
    pub thetas: Option<Vec<f64>>,
    /// Defaults to `t_max / 2`.
    pub window_start: Option<f64>,
    /// Envelope decay as a multiple of the smallest admissible `c`.
    pub envelope_factor: f64,
}

impl Default for FrontsOptions {
    fn default() -> Self {
        Self {
            thetas: None,
            window_start: None,
            envelope_factor: 1.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyOptions {
    pub suite: Suite,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { suite: Suite::All }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default)]
    pub params: ParamsConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub nonlinearity: NonlinearityConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialConfig>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ml: Option<MlOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub renewal: Option<RenewalOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fronts: Option<FrontsOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyOptions>,
}

fn default_replicas() -> usize {
    1000
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config parses")
    }
}

/// Values given on the command line; they take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replicas: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub tolerances: Vec<(String, f64)>,
    pub suite: Option<Suite>,
}

/// Parse `NAME=VALUE`.
pub fn parse_tolerance(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s.split_once('=').ok_or_else(|| format!("expected NAME=VALUE, got {s:?}"))?;
    let v: f64 = value.trim().parse().map_err(|_| format!("tolerance {name:?} is not a number: {value:?}"))?;
    if !(v >= 0.0) || !v.is_finite() {
        return Err(format!("tolerance {name:?} must be finite and nonnegative, got {v}"));
    }
    Ok((name.trim().to_string(), v))
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, RunError> {
    serde_json::from_str(text).map_err(|e| RunError::Config(format!("config: {e}")))
}

/// Default tolerances of the checks `command` runs.
pub fn default_tolerances(command: Command, suite: Suite) -> BTreeMap<String, f64> {
    let pairs: Vec<(&str, f64)> = match command {
        Command::Ml => vec![("ml_sandwich_rel", 1e-9)],
        Command::Kernel => vec![("kernel_mass", 1e-6), ("kernel_l2_rel", 1e-4)],
        Command::Renewal => vec![("renewal_refine", 1e-3), ("renewal_asymptote_rel", 1e-2)],
        Command::Simulate => vec![("oracle_se", 3.0), ("energy_se", 3.0)],
        Command::Fronts => vec![("front_separation_ci", 5.0)],
        Command::Verify => return crate::verify::default_tolerances(suite),
    };
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

impl ExperimentConfig {
    /// Fill in defaults for `command`, apply overrides and validate.
    pub fn resolve(mut self, command: Command, o: &Overrides) -> Result<Self, RunError> {
        if let Some(c) = self.command {
            if c != command {
                return Err(RunError::Config(format!(
                    "config is for command {:?} but {:?} was requested",
                    c.name(),
                    command.name()
                )));
            }
        }
        self.command = Some(command);
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(r) = o.replicas {
            self.replicas = r;
        }
        if let Some(d) = &o.output_dir {
            self.output_dir = d.clone();
        }
        if let Some(s) = o.suite {
            self.verify.get_or_insert_with(VerifyOptions::default).suite = s;
        }
        let suite = self.verify.map(|v| v.suite).unwrap_or(Suite::All);
        let mut tols = default_tolerances(command, suite);
        let given = std::mem::take(&mut self.tolerances);
        for (k, v) in given.into_iter().chain(o.tolerances.iter().cloned()) {
            if !tols.contains_key(&k) {
                let known: Vec<&str> = tols.keys().map(|s| s.as_str()).collect();
                return Err(RunError::Config(format!(
                    "unknown tolerance {k:?} for {}; known: {}",
                    command.name(),
                    known.join(", ")
                )));
            }
            if !(v >= 0.0) || !v.is_finite() {
                return Err(RunError::Config(format!("tolerance {k:?} must be finite and nonnegative")));
            }
            tols.insert(k, v);
        }
        self.tolerances = tols;

        let keep = |c: Command| command == c;
        if !keep(Command::Ml) {
            self.ml = None;
        }
        if !keep(Command::Kernel) {
            self.kernel = None;
        }
        if !keep(Command::Renewal) {
            self.renewal = None;
        }
        if !keep(Command::Simulate) {
            self.simulate = None;
        }
        if !keep(Command::Fronts) {
            self.fronts = None;
        }
        if !keep(Command::Verify) {
            self.verify = None;
        }
        if !matches!(command, Command::Simulate | Command::Fronts) {
            self.initial = None;
        }
        match command {
            Command::Ml => {
                let m = self.ml.get_or_insert_with(MlOptions::default);
                if m.betas.is_empty() || m.points == 0 || !(m.x_max > 0.0) {
                    return Err(RunError::Config("ml: need betas, points >= 1 and x_max > 0".into()));
                }
            }
            Command::Kernel => {
                let k = self.kernel.get_or_insert_with(KernelOptions::default);
                if !(k.dt > 0.0 && k.dx > 0.0) || k.nt == 0 || k.nx == 0 {
                    return Err(RunError::Config("kernel: need dt, dx > 0 and nt, nx >= 1".into()));
                }
            }
            Command::Renewal => {
                let r = self.renewal.get_or_insert_with(RenewalOptions::default);
                if r.points < 2 {
                    return Err(RunError::Config("renewal: need points >= 2".into()));
                }
                if r.t_max.is_none() {
                    let c = fracspde_core::renewal::tilt_constant(r.b, r.theta)
                        .map_err(|e| RunError::Config(format!("renewal: {e}")))?;
                    if !(c > 0.0) {
                        return Err(RunError::Config("renewal: t_max is required when b = 0".into()));
                    }
                    r.t_max = Some(8.0 / c);
                }
            }
            Command::Simulate => {
                self.simulate.get_or_insert_with(SimulateOptions::default);
                self.initial.get_or_insert(InitialConfig::Constant { value: 1.0 });
            }
            Command::Fronts => {
                let params = self.params.model()?;
                let sigma = self.nonlinearity.spec()?;
                let t_max = self.grid.t_max;
                let f = self.fronts.get_or_insert_with(FrontsOptions::default);
                if f.thetas.is_none() {
                    let th = front_bounds(&params, &sigma)
                        .map_err(|e| RunError::Config(format!("fronts: {e}")))?
                        .threshold;
                    f.thetas = Some(vec![0.1, th, 2.0 * th]);
                }
                f.window_start.get_or_insert(0.5 * t_max);
                self.initial.get_or_insert(InitialConfig::Indicator {
                    lo: -0.5,
                    hi: 0.5,
                    value: 1.0,
                });
            }
            Command::Verify => {
                self.verify.get_or_insert_with(VerifyOptions::default);
            }
        }
        self.params.model()?;
        if matches!(command, Command::Simulate | Command::Fronts) {
            if self.replicas < 2 {
                return Err(RunError::Config("replicas must be at least 2".into()));
            }
            self.simulation_spec()?;
        }
        Ok(self)
    }

    /// The simulation described by a resolved `simulate` or `fronts` config.
    pub fn simulation_spec(&self) -> Result<SimulationSpec, RunError> {
        let params = self.params.model()?;
        let grid = self.grid.grid()?;
        let sigma = self.nonlinearity.spec()?;
        let initial = self
            .initial
            .as_ref()
            .ok_or_else(|| RunError::Config("initial condition missing".into()))?;
        let u0 = initial.field(&grid)?;
        let mut record_cells: Vec<usize> = match &self.simulate {
            Some(s) => s.record_x.iter().map(|&x| grid.nearest_cell(x)).collect(),
            None => Vec::new(),
        };
        record_cells.sort_unstable();
        record_cells.dedup();
        Ok(SimulationSpec {
            params,
            grid,
            u0,
            sigma,
            seed: self.seed,
            replicas: self.replicas,
            record_cells,
        })
    }

    pub fn tolerance(&self, name: &str) -> f64 {
        self.tolerances[name]
    }
}
