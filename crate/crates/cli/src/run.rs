//! Single-run orchestration: oracles up front, the simulation with per-frame
//! checks, the post-run barrier comparison, and the output bundle.

use std::path::Path;

use bouss1d::diagnostics::{
    bkm_codivergence, check_gamma_bound, check_positivity_window, detect_blowup, gamma_probes, BkmReport,
    Classification, DiagnosticsFrame, GammaProbe,
};
use bouss1d::interp::linear_at;
use bouss1d::model::{Frame, InitialDataSpec, LagrangianState, ModelParams};
use bouss1d::oracles::{gamma_blowup_time, solve_f_picard, solve_tau0, solve_warmup_g, WarmupCurve};
use bouss1d::solver::{run_simulation_observed, RunOptions, StepControl, Termination};
use serde::Serialize;

use crate::config::ResolvedRun;
use crate::error::CliError;
use crate::output::{create_dir, csv_row, frames_csv, num, write_json, write_text, PROFILE_HEADER};

/// `sup |omega - rho W| <= 1e-8 (1 + sup omega)`
pub const OMEGA_CONSISTENCY_TOL: f64 = 1e-8;
/// `D >= f (1 - 1e-3)`
pub const F_COMPARISON_SLACK: f64 = 1e-3;
/// `1 / phi(1/3, t) >= G(t) (1 - 1e-2)`
pub const WARMUP_BARRIER_SLACK: f64 = 1e-2;
pub const GAMMA_PROBE_COUNT: usize = 16;
const ORACLE_TOL: f64 = 1e-10;
const F_GRID: usize = 129;
const BARRIER_LABEL: f64 = 1.0 / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub status: CheckStatus,
    /// Frames the check was evaluated at.
    pub frames: usize,
    /// Extreme value of the checked quantity; see `detail`.
    pub worst: Option<f64>,
    pub detail: String,
}

impl CheckOutcome {
    fn not_applicable(detail: impl Into<String>) -> Self {
        CheckOutcome { status: CheckStatus::NotApplicable, frames: 0, worst: None, detail: detail.into() }
    }

    pub fn failed(&self) -> bool {
        self.status == CheckStatus::Fail
    }
}

/// Running extreme of a per-frame check.
#[derive(Debug, Clone)]
struct Tally {
    frames: usize,
    worst: f64,
    first_failure: Option<String>,
    label: &'static str,
}

impl Tally {
    fn new(label: &'static str, start: f64) -> Self {
        Tally { frames: 0, worst: start, first_failure: None, label }
    }

    fn record(&mut self, value: f64, worse: impl Fn(f64, f64) -> bool, ok: bool, t: f64, why: impl FnOnce() -> String) {
        self.frames += 1;
        if worse(value, self.worst) || self.worst.is_nan() {
            self.worst = value;
        }
        if !ok && self.first_failure.is_none() {
            self.first_failure = Some(format!("t = {}: {}", num(t), why()));
        }
    }

    fn finish(self) -> CheckOutcome {
        if self.frames == 0 {
            return CheckOutcome::not_applicable(format!("{}; no frame in range", self.label));
        }
        let (status, detail) = match self.first_failure {
            Some(why) => (CheckStatus::Fail, format!("{}; first failure at {why}", self.label)),
            None => (CheckStatus::Pass, self.label.to_string()),
        };
        CheckOutcome { status, frames: self.frames, worst: Some(self.worst), detail }
    }
}

fn larger(a: f64, b: f64) -> bool {
    a > b
}

fn smaller(a: f64, b: f64) -> bool {
    a < b
}

#[derive(Debug, Clone, Serialize)]
pub struct Checks {
    pub positivity: CheckOutcome,
    pub gamma_bound: CheckOutcome,
    pub f_comparison: CheckOutcome,
    pub omega_consistency: CheckOutcome,
    /// Unit-interval runs: the lower barrier on the inverse trajectory.
    pub warmup_barrier: CheckOutcome,
}

impl Checks {
    pub fn get(&self, name: &str) -> Option<&CheckOutcome> {
        match name {
            "positivity" => Some(&self.positivity),
            "gamma_bound" => Some(&self.gamma_bound),
            "f_comparison" => Some(&self.f_comparison),
            "omega_consistency" => Some(&self.omega_consistency),
            "warmup_barrier" => Some(&self.warmup_barrier),
            _ => None,
        }
    }

    pub fn all(&self) -> [(&'static str, &CheckOutcome); 5] {
        [
            ("positivity", &self.positivity),
            ("gamma_bound", &self.gamma_bound),
            ("f_comparison", &self.f_comparison),
            ("omega_consistency", &self.omega_consistency),
            ("warmup_barrier", &self.warmup_barrier),
        ]
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub params: ModelParams,
    pub spec: InitialDataSpec,
    pub solver: StepControl,
    pub t_end: f64,
    pub classification: Classification,
    #[serde(rename = "T_est")]
    pub t_est: Option<f64>,
    pub tau0: Option<f64>,
    /// Singular time of the barrier trajectory started at `L4`.
    pub gamma_tstar: Option<f64>,
    pub cause: Termination,
    pub detail: String,
    pub reason: String,
    pub loglog_slope: Option<f64>,
    pub t_final: f64,
    pub steps: usize,
    pub rejected: usize,
    pub initial_markers: usize,
    pub final_markers: usize,
    pub frames: usize,
    pub checks: Checks,
    pub bkm: Option<BkmReport>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub summary: Summary,
    pub frames: Vec<DiagnosticsFrame>,
    pub final_state: LagrangianState,
}

impl RunResult {
    /// 3 for an aborted run, 4 if a check in `required` failed, else 0.
    pub fn exit_code(&self, required: &[String]) -> i32 {
        if self.summary.classification == Classification::Aborted {
            return 3;
        }
        let failed = required.iter().any(|name| self.summary.checks.get(name).is_some_and(CheckOutcome::failed));
        if failed {
            4
        } else {
            0
        }
    }

    /// Names of failed checks.
    pub fn failures(&self) -> Vec<&'static str> {
        self.summary.checks.all().into_iter().filter(|(_, c)| c.failed()).map(|(n, _)| n).collect()
    }
}

/// Deformation samples at labels in `[L2, L3]` of one frame.
struct DSample {
    t: f64,
    points: Vec<(f64, f64)>,
}

/// Runs the simulation described by `run` and evaluates every applicable
/// check. Nothing is written.
pub fn simulate(run: &ResolvedRun) -> Result<RunResult, CliError> {
    let (params, spec) = (&run.params, &run.spec);
    let z_frame = spec.frame == Frame::ZModel;
    let mut notes = Vec::new();

    // the positivity and barrier-f statements assume a unit plateau
    let unit_plateau = spec.amplitude == 1.0;
    let tau0 = if z_frame && params.epsilon.is_some() {
        match solve_tau0(params, spec.l0, spec.l1) {
            Ok(t) => Some(t.tau0),
            Err(e) => {
                notes.push(format!("tau0 unavailable: {e}"));
                None
            }
        }
    } else {
        None
    };
    let gamma_tstar = if z_frame { Some(gamma_blowup_time(spec.l4)?) } else { None };
    let probes: Vec<GammaProbe> =
        if z_frame { gamma_probes(1.0, spec.l4, GAMMA_PROBE_COUNT, ORACLE_TOL)? } else { Vec::new() };
    let warmup: Option<WarmupCurve> = if spec.frame == Frame::XWarmup && spec.warmup_plateau.0 <= BARRIER_LABEL {
        Some(solve_warmup_g(ORACLE_TOL)?)
    } else {
        None
    };

    let opts = RunOptions { t_end: run.t_end, checkpoints: tau0.map(|t| vec![0.5 * t, t]).unwrap_or_default() };
    let mut omega = Tally::new("max |omega - rho W| / (1 + sup omega)", 0.0);
    let mut positivity = Tally::new("min K over the positivity window for t <= tau0", f64::INFINITY);
    let mut gamma = Tally::new("max phi / Gamma over probes with t <= 0.9 t*", 0.0);
    let mut barrier = Tally::new("min (1 / phi(1/3, t)) / G(t)", f64::INFINITY);
    let mut samples: Vec<DSample> = Vec::new();
    let mut observer_error: Option<bouss1d::Error> = None;

    let out = run_simulation_observed(params, spec, &run.ctrl, &opts, |state, frame| {
        let t = state.t;
        let sup = state.sup_omega();
        let err =
            (0..state.len()).map(|i| (state.omega[i] - state.rho[i] * state.forcing[i]).abs()).fold(0.0f64, f64::max)
                / (1.0 + sup);
        omega.record(err, larger, err <= OMEGA_CONSISTENCY_TOL, t, || format!("defect {}", num(err)));

        if !z_frame {
            if let (Some(g), Some(phi)) = (&warmup, linear_at(&state.label, &state.phi, BARRIER_LABEL)) {
                if let Some(gv) = g.g_at(t) {
                    let ratio = 1.0 / (phi * gv);
                    let ok = ratio >= 1.0 - WARMUP_BARRIER_SLACK;
                    barrier.record(ratio, smaller, ok, t, || format!("ratio {}", num(ratio)));
                }
            }
            return;
        }

        let report = check_gamma_bound(state, &probes);
        if report.checked > 0 {
            let ratio = report.worst_ratio;
            gamma.record(ratio, larger, report.pass, t, || format!("ratio {}", num(ratio)));
        }

        if tau0.is_some_and(|t0| t <= t0) {
            match check_positivity_window(state, params, spec) {
                Ok(p) => {
                    let ok = p.pass && p.plateau_pass;
                    let value = if p.min_k.is_nan() { f64::INFINITY } else { p.min_k };
                    positivity.record(value, smaller, ok, t, || {
                        format!(
                            "min K {} (tol {}), plateau slack {} (tol {})",
                            num(p.min_k),
                            num(p.tol_k),
                            num(p.plateau_slack),
                            num(p.plateau_tol)
                        )
                    });
                }
                Err(e) => {
                    observer_error.get_or_insert(e);
                }
            }
        }

        let points: Vec<(f64, f64)> = (0..state.len())
            .filter(|&i| state.label[i] >= spec.l2 && state.label[i] <= spec.l3)
            .map(|i| (state.label[i], state.deform[i]))
            .collect();
        samples.push(DSample { t: frame.t, points });
    })?;
    if let Some(e) = observer_error {
        return Err(e.into());
    }

    let f_comparison = if !z_frame {
        CheckOutcome::not_applicable("barrier f is defined in the log frame")
    } else if !unit_plateau {
        CheckOutcome::not_applicable("barrier f assumes a unit density plateau")
    } else {
        compare_with_f(params, spec, &samples)
    };
    let positivity = if tau0.is_none() {
        CheckOutcome::not_applicable("no positivity horizon tau0 for these parameters")
    } else if !unit_plateau {
        CheckOutcome::not_applicable("the plateau bound assumes a unit density plateau")
    } else {
        positivity.finish()
    };
    let gamma_bound = if z_frame {
        gamma.finish()
    } else {
        CheckOutcome::not_applicable("barrier Gamma is defined in the log frame")
    };
    let warmup_barrier = if warmup.is_some() {
        barrier.finish()
    } else {
        CheckOutcome::not_applicable("needs a unit-interval run with label 1/3 in the plateau")
    };

    let blowup = detect_blowup(&out.frames, out.cause);
    let bkm = if blowup.classification == Classification::Blowup { bkm_codivergence(&out.frames) } else { None };
    let summary = Summary {
        params: *params,
        spec: spec.clone(),
        solver: run.ctrl.clone(),
        t_end: run.t_end,
        classification: blowup.classification,
        t_est: blowup.t_est,
        tau0,
        gamma_tstar,
        cause: out.cause,
        detail: out.detail.clone(),
        reason: blowup.reason,
        loglog_slope: blowup.loglog_slope,
        t_final: out.final_state.t,
        steps: out.steps,
        rejected: out.rejected,
        initial_markers: out.initial_markers,
        final_markers: out.final_state.len(),
        frames: out.frames.len(),
        checks: Checks { positivity, gamma_bound, f_comparison, omega_consistency: omega.finish(), warmup_barrier },
        bkm,
        notes,
    };
    Ok(RunResult { summary, frames: out.frames, final_state: out.final_state })
}

/// Solves the barrier `f` on `[L2, L3] x [0, t_last]` and compares the
/// stored deformations against it wherever it is finite.
fn compare_with_f(params: &ModelParams, spec: &InitialDataSpec, samples: &[DSample]) -> CheckOutcome {
    let c = params.stretch_constant();
    if !(c > 0.0) {
        return CheckOutcome::not_applicable(format!("stretch constant c = {} is not positive", num(c)));
    }
    let t_last = samples.last().map_or(0.0, |s| s.t);
    if !(t_last > 0.0) {
        return CheckOutcome::not_applicable("no frame after t = 0");
    }
    let field = match solve_f_picard(c, spec.l2, spec.l3, t_last, F_GRID, ORACLE_TOL) {
        Ok(f) => f,
        Err(e) => {
            return CheckOutcome {
                status: CheckStatus::Fail,
                frames: 0,
                worst: None,
                detail: format!("barrier f could not be solved: {e}"),
            }
        }
    };
    let mut tally = Tally::new("min D / f over labels in [L2, L3] where f is finite", f64::INFINITY);
    for s in samples {
        let mut worst = f64::INFINITY;
        let mut seen = false;
        for &(z, d) in &s.points {
            let Some(fv) = field.value_at(z, s.t).filter(|v| v.is_finite()) else {
                continue;
            };
            seen = true;
            worst = worst.min(d / fv);
        }
        if seen {
            let ok = worst >= 1.0 - F_COMPARISON_SLACK;
            tally.record(worst, smaller, ok, s.t, || format!("D / f = {}", num(worst)));
        }
    }
    tally.finish()
}

pub fn profile_csv(spec: &InitialDataSpec, state: &LagrangianState) -> String {
    let mut out = String::from(PROFILE_HEADER);
    out.push('\n');
    for i in 0..state.len() {
        let l = state.label[i];
        out.push_str(&csv_row(&[
            num(l),
            num(spec.rho0(l)),
            num(state.phi[i]),
            num(state.omega[i]),
            num(state.deform[i]),
        ]));
    }
    out
}

/// Writes `frames.csv`, `summary.json` and, if requested, `profile.csv`.
pub fn write_bundle(result: &RunResult, dir: &Path, emit_profile: bool) -> Result<(), CliError> {
    create_dir(dir)?;
    write_text(&dir.join("frames.csv"), &frames_csv(&result.frames))?;
    write_json(&dir.join("summary.json"), &result.summary)?;
    if emit_profile {
        write_text(&dir.join("profile.csv"), &profile_csv(&result.summary.spec, &result.final_state))?;
    }
    Ok(())
}

/// Simulates, writes the bundle to `dir` and returns the result with its
/// exit code.
pub fn execute_run(run: &ResolvedRun, dir: &Path) -> Result<(RunResult, i32), CliError> {
    let result = simulate(run)?;
    write_bundle(&result, dir, run.output.emit_profile)?;
    let code = result.exit_code(&run.require);
    Ok((result, code))
}
