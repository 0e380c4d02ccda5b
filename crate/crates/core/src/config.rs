//! TOML experiment configuration.
//!
//! ```toml
//! [model]
//! n = 3
//! radius = 1.0
//! m = 1.0
//! q = 1.0
//!
//! [initdata]
//! mass = 20.0
//! eta_halvings = 3
//! ```
//!
//! Every block except `model` and `initdata.mass` has defaults. Unknown keys are errors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::initdata::ParameterOverrides;
use crate::motility::{ModelParams, MotilityModel};
use crate::solver::SolverConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    #[default]
    Prototype,
    /// Planar model with ψ carrying an extra ln(s + e) factor.
    #[serde(alias = "prototype_log")]
    PrototypeLog,
    /// Pointwise φ, ψ supplied through the library; not constructible from a file.
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    #[serde(default)]
    pub kind: ModelKind,
    pub n: usize,
    #[serde(default = "one")]
    pub radius: f64,
    pub m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s0: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl ModelBlock {
    /// Builds the motility model; the prototype pair needs q1 = q2.
    pub fn build(&self) -> Result<MotilityModel> {
        let (q1, q2) = match (self.q, self.q1, self.q2) {
            (Some(q), None, None) => (q, q),
            (None, Some(a), Some(b)) => (a, b),
            (None, None, None) if self.kind == ModelKind::PrototypeLog => (self.m, 1.25 * self.m),
            (Some(_), _, _) => {
                return Err(Error::Config("model.q excludes model.q1 and model.q2".into()))
            }
            _ => {
                return Err(Error::Config(
                    "model needs either q or both q1 and q2".into(),
                ))
            }
        };
        let model = match self.kind {
            ModelKind::Prototype => {
                if q1 != q2 {
                    let mut p = ModelParams::prototype(self.n, self.radius, self.m, q1);
                    p.q2 = q2;
                    p.validate().map_err(config_error)?;
                    return Err(Error::Config(format!(
                        "the prototype pair has q1 = q2; got q1 = {q1}, q2 = {q2}"
                    )));
                }
                MotilityModel::prototype(self.n, self.radius, self.m, q1).map_err(config_error)?
            }
            ModelKind::PrototypeLog => {
                if self.n != 2 {
                    return Err(Error::Config(format!(
                        "model.kind = prototype-log requires n = 2, got n = {}",
                        self.n
                    )));
                }
                if self.q.is_some() || self.q1.is_some() {
                    return Err(Error::Config(
                        "prototype-log fixes its exponents from m; drop q, q1, q2".into(),
                    ));
                }
                MotilityModel::prototype_log(self.radius, self.m).map_err(config_error)?
            }
            ModelKind::Custom => {
                return Err(Error::Config(
                    "model.kind = custom needs evaluators for phi and psi; build it with MotilityModel::custom".into(),
                ))
            }
        };
        match self.s0 {
            Some(s0) => model.with_s0(s0).map_err(config_error),
            None => Ok(model),
        }
    }
}

fn config_error(e: Error) -> Error {
    match e {
        Error::Precondition(msg) | Error::Domain(msg) => Error::Config(msg),
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitDataBlock {
    pub mass: f64,
    /// Concentration η; exclusive with `eta_halvings`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// η = η₀/2^k.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_halvings: Option<u32>,
    /// Family length for η-sweeps.
    #[serde(default = "default_sweep")]
    pub sweep_halvings: u32,
    /// θ used for γ when no admissibility certificate is available.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default)]
    pub overrides: ParameterOverrides,
}

fn default_sweep() -> u32 {
    8
}

impl InitDataBlock {
    pub fn eta(&self, eta0: f64) -> f64 {
        match (self.eta, self.eta_halvings) {
            (Some(eta), _) => eta,
            (None, Some(k)) => eta0 / 2f64.powi(k as i32),
            (None, None) => eta0 / 8.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GradingKind {
    Uniform,
    #[default]
    Geometric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    #[serde(default = "default_cells")]
    pub cells: usize,
    #[serde(default)]
    pub grading: GradingKind,
    /// Innermost width as a fraction of η: h_min = η / resolve.
    #[serde(default = "default_resolve")]
    pub resolve: f64,
}

fn default_cells() -> usize {
    2048
}

fn default_resolve() -> f64 {
    8.0
}

impl Default for GridBlock {
    fn default() -> Self {
        Self {
            cells: default_cells(),
            grading: GradingKind::default(),
            resolve: default_resolve(),
        }
    }
}

/// Solver settings as they appear in the file; missing keys take the solver defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    pub cfl_safety: Option<f64>,
    pub dt_min: Option<f64>,
    pub dt_max: Option<f64>,
    pub u_blowup_threshold: Option<f64>,
    pub t_end: Option<f64>,
    pub monitor_alpha: Option<f64>,
    pub monitor_kappa: Option<f64>,
    pub chemotaxis_switch: Option<f64>,
    pub clip_budget: Option<u64>,
    pub max_steps: Option<u64>,
}

impl SolverBlock {
    /// Solver configuration; the monitor exponents fall back to the data's α and κ.
    pub fn resolve(&self, alpha: f64, kappa: f64) -> SolverConfig {
        let d = SolverConfig::default();
        SolverConfig {
            cfl_safety: self.cfl_safety.unwrap_or(d.cfl_safety),
            dt_min: self.dt_min.unwrap_or(d.dt_min),
            dt_max: self.dt_max.unwrap_or(d.dt_max),
            u_blowup_threshold: self.u_blowup_threshold.unwrap_or(d.u_blowup_threshold),
            t_end: self.t_end.unwrap_or(d.t_end),
            monitor_alpha: self.monitor_alpha.unwrap_or(alpha),
            monitor_kappa: self.monitor_kappa.unwrap_or(kappa),
            chemotaxis_switch: self.chemotaxis_switch.unwrap_or(d.chemotaxis_switch),
            clip_budget: self.clip_budget.unwrap_or(d.clip_budget),
            max_steps: self.max_steps.unwrap_or(d.max_steps),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsBlock {
    #[serde(default = "default_dir")]
    pub directory: String,
    /// Steps between snapshots; 0 keeps only the first and last state.
    #[serde(default)]
    pub snapshot_stride: u64,
    /// Steps between trace records; the last state is always recorded.
    #[serde(default = "default_trace_stride")]
    pub trace_stride: u64,
}

fn default_dir() -> String {
    "out".into()
}

fn default_trace_stride() -> u64 {
    1
}

impl Default for OutputsBlock {
    fn default() -> Self {
        Self {
            directory: default_dir(),
            snapshot_stride: 0,
            trace_stride: default_trace_stride(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateBlock {
    #[serde(default = "default_s_max")]
    pub s_max: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

fn default_s_max() -> f64 {
    1e6
}

fn default_samples() -> usize {
    2000
}

impl Default for CertificateBlock {
    fn default() -> Self {
        Self {
            s_max: default_s_max(),
            samples: default_samples(),
            theta: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelBlock,
    pub initdata: InitDataBlock,
    #[serde(default)]
    pub grid: GridBlock,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default)]
    pub outputs: OutputsBlock,
    #[serde(default)]
    pub certificate: CertificateBlock,
}

/// 1-based line and column of a byte offset.
fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_column(text, s.start));
        Error::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let model = self.model.build()?;
        let eta0 = 1f64.min(0.5 * model.params().radius);
        let ib = &self.initdata;
        if !(ib.mass > 0.0 && ib.mass.is_finite()) {
            return Err(Error::Config(format!("initdata.mass = {} must be positive", ib.mass)));
        }
        if ib.eta.is_some() && ib.eta_halvings.is_some() {
            return Err(Error::Config("initdata.eta excludes initdata.eta_halvings".into()));
        }
        let eta = ib.eta(eta0);
        if !(eta > 0.0 && eta < eta0) {
            return Err(Error::Config(format!(
                "initdata.eta = {eta} must lie in (0, eta0 = {eta0})"
            )));
        }
        if ib.sweep_halvings == 0 {
            return Err(Error::Config("initdata.sweep_halvings must be >= 1".into()));
        }
        if let Some(theta) = ib.theta.or(self.certificate.theta) {
            if !(theta > 0.0 && theta < 1.0) {
                return Err(Error::Config(format!("theta = {theta} must lie in (0, 1)")));
            }
        }
        if self.grid.cells < 2 {
            return Err(Error::Config(format!("grid.cells = {} must be >= 2", self.grid.cells)));
        }
        if !(self.grid.resolve > 0.0) {
            return Err(Error::Config(format!(
                "grid.resolve = {} must be positive",
                self.grid.resolve
            )));
        }
        self.solver.resolve(1.0, 1.0).validate()?;
        if self.outputs.trace_stride == 0 {
            return Err(Error::Config("outputs.trace_stride must be >= 1".into()));
        }
        if self.certificate.samples < 100 || !(self.certificate.s_max > model.params().s0) {
            return Err(Error::Config(format!(
                "certificate needs samples >= 100 and s_max > s0 (got {}, {})",
                self.certificate.samples, self.certificate.s_max
            )));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}
