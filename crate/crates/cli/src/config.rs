//! TOML run and sweep configuration.
//!
//! ```toml
//! [model]
//! beta1 = 1.2
//! beta2 = 0.9
//!
//! [data]
//! L0 = 2.0
//! L1 = 8.0
//! L2 = 9.0
//! L3 = 12.0
//! L4 = 14.0
//! frame = "z_model"        # or "x_warmup"
//! markers = 4096
//! # plateau = [0.3333, 0.6667]  warm-up plateau interval
//! # plateau = 0.0               plateau height (0 gives rho0 == 0)
//!
//! [solver]
//! t_end = 2.0
//!
//! [output]
//! dir = "out"
//! emit_profile = true
//!
//! [checks]
//! require = ["omega_consistency", "gamma_bound"]
//! ```
//!
//! Every key except `model.beta1` and `model.beta2` has a default.

use std::path::{Path, PathBuf};

use bouss1d::model::{make_params, Frame, InitialDataSpec, ModelParams};
use bouss1d::solver::StepControl;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: Option<f64>,
}

/// `plateau` is either the warm-up plateau interval or the plateau height.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum Plateau {
    Interval([f64; 2]),
    Height(f64),
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    #[serde(rename = "L0")]
    pub l0: Option<f64>,
    #[serde(rename = "L1")]
    pub l1: Option<f64>,
    #[serde(rename = "L2")]
    pub l2: Option<f64>,
    #[serde(rename = "L3")]
    pub l3: Option<f64>,
    #[serde(rename = "L4")]
    pub l4: Option<f64>,
    pub frame: Option<Frame>,
    pub markers: Option<usize>,
    pub plateau: Option<Plateau>,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub dt_init: Option<f64>,
    pub dt_min: Option<f64>,
    pub dt_safety: Option<f64>,
    pub rk_tol: Option<f64>,
    pub omega_cap: Option<f64>,
    pub h_max: Option<f64>,
    pub refine_tol: Option<f64>,
    pub max_markers: Option<usize>,
    pub t_end: Option<f64>,
    pub frame_stride: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub emit_profile: bool,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: default_dir(), emit_profile: false }
    }
}

/// Names of the checks recorded in `summary.json`.
pub const CHECK_NAMES: [&str; 5] = ["positivity", "gamma_bound", "f_comparison", "omega_consistency", "warmup_barrier"];

#[derive(Debug, Clone, PartialEq, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksSection {
    /// Checks whose failure turns the exit code into 4.
    #[serde(default)]
    pub require: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub checks: ChecksSection,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub beta1: Vec<f64>,
    pub beta2: Vec<f64>,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

fn default_workers() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub sweep: SweepSection,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// A validated run: everything the driver needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedRun {
    pub params: ModelParams,
    pub spec: InitialDataSpec,
    pub ctrl: StepControl,
    pub t_end: f64,
    pub output: OutputSection,
    pub require: Vec<String>,
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("invalid run config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        Self::from_toml(&read(path)?)
    }

    /// Builds and validates parameters, initial data and step controls.
    pub fn resolve(&self) -> Result<ResolvedRun, CliError> {
        let params = make_params(self.model.beta1, self.model.beta2, self.model.epsilon)?;
        let (spec, ctrl, t_end) = resolve_data_and_solver(&self.data, &self.solver, &params)?;
        for name in &self.checks.require {
            if !CHECK_NAMES.contains(&name.as_str()) {
                return Err(CliError::Config(format!(
                    "unknown check `{name}` in [checks] require; expected one of {CHECK_NAMES:?}"
                )));
            }
        }
        Ok(ResolvedRun { params, spec, ctrl, t_end, output: self.output.clone(), require: self.checks.require.clone() })
    }
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: SweepConfig =
            toml::from_str(text).map_err(|e| CliError::Config(format!("invalid sweep config: {e}")))?;
        if cfg.sweep.beta1.is_empty() || cfg.sweep.beta2.is_empty() {
            return Err(CliError::Config("sweep grid must be non-empty".into()));
        }
        if cfg.sweep.workers == 0 {
            return Err(CliError::Config("sweep workers must be at least 1".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        Self::from_toml(&read(path)?)
    }

    /// Run configuration of one grid cell.
    pub fn cell(&self, beta1: f64, beta2: f64) -> RunConfig {
        RunConfig {
            model: ModelSection { beta1, beta2, epsilon: None },
            data: self.data.clone(),
            solver: self.solver.clone(),
            output: self.output.clone(),
            checks: ChecksSection::default(),
        }
    }
}

/// Horizon when `[solver] t_end` is absent; long enough for the unit-data
/// runs to reach the vorticity cap.
pub const DEFAULT_T_END: f64 = 2.0;

/// Applies the `[data]` and `[solver]` overrides to the defaults.
pub fn resolve_data_and_solver(
    data: &DataSection,
    solver: &SolverSection,
    params: &ModelParams,
) -> Result<(InitialDataSpec, StepControl, f64), CliError> {
    let mut spec = InitialDataSpec::default();
    if let Some(frame) = data.frame {
        spec.frame = frame;
    }
    let ladder = [
        (&mut spec.l0, data.l0),
        (&mut spec.l1, data.l1),
        (&mut spec.l2, data.l2),
        (&mut spec.l3, data.l3),
        (&mut spec.l4, data.l4),
    ];
    for (slot, value) in ladder {
        if let Some(v) = value {
            *slot = v;
        }
    }
    if let Some(n) = data.markers {
        spec.n_markers = n;
    }
    match data.plateau {
        Some(Plateau::Interval([a, b])) => {
            if spec.frame != Frame::XWarmup {
                return Err(CliError::Config(
                    "a plateau interval applies to frame = \"x_warmup\"; use a number to set the plateau height".into(),
                ));
            }
            spec.warmup_plateau = (a, b);
        }
        Some(Plateau::Height(h)) => spec.amplitude = h,
        None => {}
    }
    spec.validate(params)?;

    let mut ctrl = StepControl::for_spec(&spec);
    let s = solver;
    let fields = [
        (&mut ctrl.dt_init, s.dt_init),
        (&mut ctrl.dt_min, s.dt_min),
        (&mut ctrl.dt_safety, s.dt_safety),
        (&mut ctrl.rk_tol, s.rk_tol),
        (&mut ctrl.omega_cap, s.omega_cap),
        (&mut ctrl.h_max, s.h_max),
        (&mut ctrl.refine_tol, s.refine_tol),
    ];
    for (slot, value) in fields {
        if let Some(v) = value {
            *slot = v;
        }
    }
    if let Some(m) = s.max_markers {
        ctrl.max_markers = m;
    }
    if let Some(k) = s.frame_stride {
        ctrl.frame_stride = k;
    }
    ctrl.validate()?;
    let t_end = s.t_end.unwrap_or(DEFAULT_T_END);
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(bouss1d::Error::config("t_end > 0", format!("t_end = {t_end}")).into());
    }
    Ok((spec, ctrl, t_end))
}
