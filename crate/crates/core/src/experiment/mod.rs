//! Config-driven experiment runs.
//!
//! An experiment file names a problem file and carries one parameter section
//! per kind. [`run`] writes the kind's CSV tables and a plain-text
//! `summary.txt` into the output directory. The summary ends with a manifest:
//! crate version, timings, the effective configuration and the problem file
//! verbatim, which is enough to repeat the run.
//!
//! ```toml
//! problem = "../problems/pure_jump.toml"   # relative to this file
//! seed = 7
//!
//! [controls]
//! u1_points = 3
//! radius = 2.0
//!
//! [tree]
//! depth = 5
//! x0 = [0.0]
//! ```

mod kinds;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ControlGrid, ProblemSpec};
use crate::operators::{DeltaSearch, SemiLimitSchedule};
use crate::pde::{GKind, SpaceTimeGrid, TerminalParams};
use crate::perron::LadderOptions;
use crate::tree::BranchScheme;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Validate,
    Simulate,
    Operators,
    Solve,
    Tree,
    Certify,
    #[serde(alias = "embed")]
    EmbedEquivalence,
    #[serde(alias = "sweep")]
    RadiusSweep,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Validate => "validate",
            Kind::Simulate => "simulate",
            Kind::Operators => "operators",
            Kind::Solve => "solve",
            Kind::Tree => "tree",
            Kind::Certify => "certify",
            Kind::EmbedEquivalence => "embed-equivalence",
            Kind::RadiusSweep => "radius-sweep",
        }
    }

    /// Every kind, in subcommand order.
    pub fn all() -> [Kind; 8] {
        [
            Kind::Validate,
            Kind::Simulate,
            Kind::Operators,
            Kind::Solve,
            Kind::Tree,
            Kind::Certify,
            Kind::EmbedEquivalence,
            Kind::RadiusSweep,
        ]
    }
}

/// Lattice description of the control grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlsConfig {
    /// Points per `U1` coordinate.
    pub u1_points: usize,
    /// Levels for every `u2` component; empty means `u2 ≡ 0`.
    pub u2_levels: Vec<f64>,
    pub per_mark: bool,
    pub radius: f64,
}

impl Default for ControlsConfig {
    fn default() -> Self {
        ControlsConfig {
            u1_points: 1,
            u2_levels: Vec::new(),
            per_mark: false,
            radius: f64::INFINITY,
        }
    }
}

impl ControlsConfig {
    pub fn grid(&self, spec: &ProblemSpec) -> Result<ControlGrid> {
        ControlGrid::lattice(spec, self.u1_points, &self.u2_levels, self.per_mark, self.radius)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateParams {
    pub samples: usize,
}

impl Default for ValidateParams {
    fn default() -> Self {
        ValidateParams { samples: 1000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateParams {
    #[serde(default)]
    pub t0: f64,
    pub x0: Vec<f64>,
    #[serde(default)]
    pub y0: f64,
    pub paths: usize,
    pub steps: usize,
    /// Index into the control grid of the constant control.
    #[serde(default)]
    pub control: usize,
    /// Write every path, not only the terminal states.
    #[serde(default)]
    pub write_paths: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorParams {
    /// Number of random `(Θ, φ)` points.
    pub points: usize,
    #[serde(default = "default_degree")]
    pub degree: u32,
    #[serde(default = "default_terms")]
    pub terms: usize,
    pub eps: f64,
    pub eta: f64,
    pub schedule: Option<SemiLimitSchedule>,
    pub delta: Option<DeltaSearch>,
}

fn default_degree() -> u32 {
    2
}

fn default_terms() -> usize {
    3
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveForm {
    Control,
    Target,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminalData {
    /// `V(T) = g`.
    Payoff,
    /// `V(T)` from the terminal-layer equation.
    Layer,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveParams {
    pub form: SolveForm,
    pub grid: SpaceTimeGrid,
    pub g: Option<GKind>,
    #[serde(default = "default_terminal")]
    pub terminal: TerminalData,
    pub terminal_params: Option<TerminalParams>,
    /// Lattice `δ` search for the terminal layer; `δ ≡ +∞` when absent.
    pub delta: Option<DeltaSearch>,
    #[serde(default)]
    pub eps: f64,
    #[serde(default)]
    pub eta: f64,
    /// Points at which `V(0, ·)` is reported.
    #[serde(default)]
    pub report: Vec<Vec<f64>>,
    /// Write every `every`-th time slice.
    #[serde(default = "default_every")]
    pub every: usize,
}

fn default_terminal() -> TerminalData {
    TerminalData::Payoff
}

fn default_every() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeParams {
    pub depth: usize,
    pub x0: Vec<f64>,
    #[serde(default)]
    pub t0: f64,
    #[serde(default)]
    pub scheme: BranchScheme,
    #[serde(default = "default_budget")]
    pub node_budget: usize,
    #[serde(default = "default_y_max")]
    pub y_max: f64,
}

fn default_budget() -> usize {
    2_000_000
}

fn default_y_max() -> f64 {
    1e6
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyParams {
    #[serde(default)]
    pub ladder: LadderOptions,
    /// Also certify the corrupted super-solution (expected refuted).
    #[serde(default = "yes")]
    pub corrupt: bool,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedParams {
    /// Random `(t, x, y, p, φ)` samples for the `δ` check.
    #[serde(default)]
    pub delta_samples: usize,
    #[serde(default)]
    pub delta: DeltaSearch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepParams {
    pub radii: Vec<f64>,
    /// Also solve the control-form PDE (needs a `[solve]` grid).
    #[serde(default)]
    pub pde: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Option<Kind>,
    pub problem: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Defaults to `lab-output/<kind>` under the working directory.
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub controls: ControlsConfig,
    pub validate: Option<ValidateParams>,
    pub simulate: Option<SimulateParams>,
    pub operators: Option<OperatorParams>,
    pub solve: Option<SolveParams>,
    pub tree: Option<TreeParams>,
    pub certify: Option<CertifyParams>,
    pub embed: Option<EmbedParams>,
    pub sweep: Option<SweepParams>,
}

impl ExperimentConfig {
    /// Parses `text`; a relative problem path is resolved against `base`.
    pub fn from_toml_str(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Parse(format!("experiment file: {e}")))?;
        if let Some(base) = base {
            if cfg.problem.is_relative() {
                cfg.problem = base.join(&cfg.problem);
            }
            if let Some(out) = cfg.out.as_mut().filter(|o| o.is_relative()) {
                *out = base.join(&*out);
            }
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
        ExperimentConfig::from_toml_str(&text, path.parent())
    }

    fn require<'a, T>(&self, section: &'a Option<T>, name: &str) -> Result<&'a T> {
        section
            .as_ref()
            .ok_or_else(|| Error::config(format!("experiment needs a [{name}] section")))
    }
}

/// Result of a run: the output directory and the summary entries.
#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub kind: Kind,
    pub out: PathBuf,
    pub files: Vec<String>,
    pub summary: Vec<(String, String)>,
    /// Nonzero when the run completed but its check failed (violations found).
    pub status: i32,
}

impl RunReport {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.summary.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

pub(crate) struct Output {
    dir: PathBuf,
    files: Vec<String>,
    summary: Vec<(String, String)>,
    status: i32,
}

impl Output {
    fn csv(&mut self, name: &str) -> Result<csv::Writer<std::fs::File>> {
        self.files.push(name.to_string());
        Ok(csv::Writer::from_path(self.dir.join(name))?)
    }

    fn note(&mut self, key: &str, value: impl ToString) {
        self.summary.push((key.to_string(), value.to_string()));
    }

    fn fail(&mut self, status: i32) {
        self.status = self.status.max(status);
    }
}

/// Runs `cfg.kind` and writes its artifacts into `cfg.out`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunReport> {
    let kind = cfg.kind.ok_or_else(|| Error::config("experiment kind is not set"))?;
    let out_dir = cfg
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("lab-output").join(kind.name()));
    std::fs::create_dir_all(&out_dir)?;
    let problem_text = std::fs::read_to_string(&cfg.problem)
        .map_err(|e| Error::Parse(format!("cannot read {}: {e}", cfg.problem.display())))?;
    let spec = ProblemSpec::from_toml_str(&problem_text)?;
    let mut out = Output {
        dir: out_dir.clone(),
        files: Vec::new(),
        summary: Vec::new(),
        status: 0,
    };
    let started = Instant::now();
    match kind {
        Kind::Validate => kinds::validate(cfg, &spec, &mut out)?,
        Kind::Simulate => kinds::simulate(cfg, &spec, &mut out)?,
        Kind::Operators => kinds::operators(cfg, &spec, &mut out)?,
        Kind::Solve => kinds::solve(cfg, &spec, &mut out)?,
        Kind::Tree => kinds::tree(cfg, &spec, &mut out)?,
        Kind::Certify => kinds::certify(cfg, &spec, &mut out)?,
        Kind::EmbedEquivalence => kinds::embed(cfg, &spec, &mut out)?,
        Kind::RadiusSweep => kinds::sweep(cfg, &spec, &mut out)?,
    }
    let elapsed = started.elapsed();
    let mut text = String::new();
    writeln!(text, "kind = {}", kind.name()).ok();
    writeln!(text, "seed = {}", cfg.seed).ok();
    for (k, v) in &out.summary {
        writeln!(text, "{k} = {v}").ok();
    }
    writeln!(text, "status = {}", out.status).ok();
    writeln!(text, "files = {}", out.files.join(", ")).ok();
    writeln!(text, "\n# manifest").ok();
    writeln!(text, "version = {}", env!("CARGO_PKG_VERSION")).ok();
    writeln!(text, "elapsed_seconds = {:.3}", elapsed.as_secs_f64()).ok();
    writeln!(text, "threads = {}", rayon::current_num_threads()).ok();
    let echo = toml::to_string(cfg).map_err(|e| Error::config(format!("cannot echo config: {e}")))?;
    writeln!(text, "\n# effective configuration\n{echo}").ok();
    writeln!(text, "# problem file {}\n{problem_text}", cfg.problem.display()).ok();
    std::fs::write(out_dir.join("summary.txt"), text)?;
    Ok(RunReport {
        kind,
        out: out_dir,
        files: out.files,
        summary: out.summary,
        status: out.status,
    })
}

/// Runs on a dedicated pool of `workers` threads (`0` uses rayon's default).
pub fn run_with_workers(cfg: &ExperimentConfig, workers: usize) -> Result<RunReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config(format!("cannot build thread pool: {e}")))?;
    pool.install(|| run(cfg))
}
