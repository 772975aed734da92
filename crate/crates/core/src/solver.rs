//! Time integration of the marker system.
//!
//! Each marker carries its position `phi`, vorticity `omega`, deformation `D`
//! and accumulated forcing `W`. In the log frame
//!
//! ```text
//! phi' = u(phi),  omega' = rho e^phi,  D' = D K(phi),  W' = e^phi,
//! ```
//!
//! and on the unit interval `phi' = u`, `omega' = rho / phi`, `D' = D u_x`,
//! `W' = 1 / phi`. Steps are classical RK4 with a step-doubling error
//! estimate; the mesh is refined by inserting midpoint labels.

use serde::Serialize;
use thiserror::Error;

use crate::biotsavart::{velocity_and_dx_x, velocity_and_stretch_z, PrefixTable, Weight};
use crate::diagnostics::{compute_frame_with, indicator_sups, DiagnosticsFrame, RunningIntegrals};
use crate::error::{Error, Result};
use crate::interp::pchip_at;
use crate::model::{build_initial_state, Frame, InitialDataSpec, LagrangianState, ModelParams};

/// Step size and resolution controls.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepControl {
    pub dt_init: f64,
    pub dt_min: f64,
    /// Safety factor in (0, 1) applied to every step-size bound.
    pub dt_safety: f64,
    /// Local error tolerance per step, relative with a floor of one.
    pub rk_tol: f64,
    /// A run stops once `sup omega` reaches this value.
    pub omega_cap: f64,
    /// Largest allowed gap between neighbouring marker positions.
    pub h_max: f64,
    /// Largest allowed `|omega_{i+1} - omega_i| / sup omega`.
    pub refine_tol: f64,
    /// Refinement stops adding markers beyond this count.
    pub max_markers: usize,
    /// A diagnostics frame is emitted every `frame_stride` accepted steps.
    pub frame_stride: usize,
}

impl StepControl {
    /// Defaults scaled to the marker count and extent of `spec`.
    pub fn for_spec(spec: &InitialDataSpec) -> Self {
        let n = spec.n_markers as f64;
        let extent = match spec.frame {
            Frame::ZModel => spec.l4 + 2.0,
            Frame::XWarmup => 1.0,
        };
        StepControl {
            dt_init: 1e-6,
            dt_min: 1e-14,
            dt_safety: 0.8,
            rk_tol: 1e-9,
            omega_cap: 1e8,
            h_max: extent / n * 4.0,
            refine_tol: 0.05,
            max_markers: 4 * spec.n_markers,
            frame_stride: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("dt_min > 0", self.dt_min > 0.0),
            ("dt_min < dt_init", self.dt_min < self.dt_init),
            ("0 < dt_safety < 1", self.dt_safety > 0.0 && self.dt_safety < 1.0),
            ("rk_tol > 0", self.rk_tol > 0.0),
            ("omega_cap > 0", self.omega_cap > 0.0),
            ("h_max > 0", self.h_max > 0.0),
            ("refine_tol > 0", self.refine_tol > 0.0),
            ("frame_stride >= 1", self.frame_stride >= 1),
        ];
        for (name, ok) in checks {
            if !ok {
                return Err(Error::config(name, format!("{self:?}")));
            }
        }
        Ok(())
    }
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl::for_spec(&InitialDataSpec::default())
    }
}

/// Numerical failure of a single step.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error("trajectory crossing at marker {index}: resolution insufficient")]
    Crossing { index: usize },
    #[error("amplitude overflow (blow-up proxy)")]
    Overflow,
    #[error("marker left the unit interval")]
    OutOfDomain,
}

/// Why a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Horizon,
    OmegaCap,
    StepUnderflow,
    Crossing,
    Overflow,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Horizon => "horizon",
            Termination::OmegaCap => "omega_cap",
            Termination::StepUnderflow => "step_underflow",
            Termination::Crossing => "crossing",
            Termination::Overflow => "overflow",
        }
    }

    /// Causes that count as a blow-up proxy.
    pub fn is_blowup_proxy(self) -> bool {
        matches!(self, Termination::OmegaCap | Termination::StepUnderflow | Termination::Overflow)
    }
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Time derivatives of every marker, stored as `[phi | omega | D | W]`,
/// plus the velocity and its gradient (`K` in the log frame, `u_x` on the
/// unit interval) at the marker positions.
#[derive(Debug, Clone)]
pub struct Rates {
    n: usize,
    flat: Vec<f64>,
    pub velocity: Vec<f64>,
    pub gradient: Vec<f64>,
}

impl Rates {
    pub fn phi(&self) -> &[f64] {
        &self.flat[..self.n]
    }
    pub fn omega(&self) -> &[f64] {
        &self.flat[self.n..2 * self.n]
    }
    pub fn deform(&self) -> &[f64] {
        &self.flat[2 * self.n..3 * self.n]
    }
    pub fn forcing(&self) -> &[f64] {
        &self.flat[3 * self.n..]
    }
}

struct Workspace {
    velocity: Vec<f64>,
    gradient: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Workspace { velocity: Vec::with_capacity(n), gradient: Vec::with_capacity(n) }
    }
}

fn pack(state: &LagrangianState) -> Vec<f64> {
    let mut y = Vec::with_capacity(4 * state.len());
    y.extend_from_slice(&state.phi);
    y.extend_from_slice(&state.omega);
    y.extend_from_slice(&state.deform);
    y.extend_from_slice(&state.forcing);
    y
}

fn unpack(template: &LagrangianState, t: f64, y: &[f64]) -> LagrangianState {
    let n = template.len();
    LagrangianState {
        t,
        frame: template.frame,
        label: template.label.clone(),
        phi: y[..n].to_vec(),
        rho: template.rho.clone(),
        omega: y[n..2 * n].to_vec(),
        deform: y[2 * n..3 * n].to_vec(),
        forcing: y[3 * n..].to_vec(),
    }
}

fn eval_rates(
    frame: Frame,
    params: &ModelParams,
    rho: &[f64],
    y: &[f64],
    dy: &mut [f64],
    ws: &mut Workspace,
) -> std::result::Result<(), StepError> {
    let n = rho.len();
    let phi = &y[..n];
    let omega = &y[n..2 * n];
    let deform = &y[2 * n..3 * n];
    if let Some(index) = phi.windows(2).position(|w| !(w[0] < w[1])) {
        return Err(StepError::Crossing { index });
    }
    if phi.iter().chain(omega).chain(deform).any(|v| !v.is_finite()) {
        return Err(StepError::Overflow);
    }
    let weight = match frame {
        Frame::ZModel => Weight::Unit,
        Frame::XWarmup => Weight::Reciprocal,
    };
    let table = PrefixTable::from_nodes(phi.to_vec(), omega.to_vec(), weight).map_err(|_| StepError::OutOfDomain)?;
    let (vel, grad) = (&mut ws.velocity, &mut ws.gradient);
    match frame {
        Frame::ZModel => {
            velocity_and_stretch_z(&table, phi, params, vel, grad);
            for i in 0..n {
                let e = phi[i].exp();
                if !e.is_finite() {
                    return Err(StepError::Overflow);
                }
                dy[i] = vel[i];
                dy[n + i] = rho[i] * e;
                dy[2 * n + i] = deform[i] * grad[i];
                dy[3 * n + i] = e;
            }
        }
        Frame::XWarmup => {
            if !(phi[0] > 0.0 && phi[n - 1] < 1.0) {
                return Err(StepError::OutOfDomain);
            }
            velocity_and_dx_x(&table, phi, params, vel, grad).map_err(|_| StepError::OutOfDomain)?;
            for i in 0..n {
                let r = 1.0 / phi[i];
                dy[i] = vel[i];
                dy[n + i] = rho[i] * r;
                dy[2 * n + i] = deform[i] * grad[i];
                dy[3 * n + i] = r;
            }
        }
    }
    if dy.iter().any(|v| !v.is_finite()) {
        return Err(StepError::Overflow);
    }
    Ok(())
}

/// Time derivatives of every marker of `state`.
pub fn rhs_eval(state: &LagrangianState, params: &ModelParams) -> std::result::Result<Rates, StepError> {
    let n = state.len();
    let y = pack(state);
    let mut flat = vec![0.0; 4 * n];
    let mut ws = Workspace::new(n);
    eval_rates(state.frame, params, &state.rho, &y, &mut flat, &mut ws)?;
    Ok(Rates { n, flat, velocity: ws.velocity, gradient: ws.gradient })
}

/// One classical RK4 step of an autonomous system from `y` with the
/// first stage `k1` already known.
fn rk4_from<E, F>(y: &[f64], k1: &[f64], dt: f64, f: &mut F) -> std::result::Result<Vec<f64>, E>
where
    F: FnMut(&[f64], &mut [f64]) -> std::result::Result<(), E>,
{
    let m = y.len();
    let mut tmp = vec![0.0; m];
    let mut k2 = vec![0.0; m];
    let mut k3 = vec![0.0; m];
    let mut k4 = vec![0.0; m];
    for i in 0..m {
        tmp[i] = y[i] + 0.5 * dt * k1[i];
    }
    f(&tmp, &mut k2)?;
    for i in 0..m {
        tmp[i] = y[i] + 0.5 * dt * k2[i];
    }
    f(&tmp, &mut k3)?;
    for i in 0..m {
        tmp[i] = y[i] + dt * k3[i];
    }
    f(&tmp, &mut k4)?;
    for i in 0..m {
        tmp[i] = y[i] + dt / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
    }
    Ok(tmp)
}

/// Classical RK4 step of `y' = f(y)`; the integrator used by the marker
/// solver, exposed for convergence studies on manufactured systems.
pub fn rk4_step_with<F>(y: &[f64], dt: f64, mut f: F) -> Vec<f64>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let mut k1 = vec![0.0; y.len()];
    f(y, &mut k1);
    let mut g = |y: &[f64], dy: &mut [f64]| -> std::result::Result<(), std::convert::Infallible> {
        f(y, dy);
        Ok(())
    };
    match rk4_from(y, &k1, dt, &mut g) {
        Ok(v) => v,
        Err(never) => match never {},
    }
}

/// Result of one attempted step.
#[derive(Debug, Clone)]
pub enum StepOutcome {
    Accepted {
        state: LagrangianState,
        /// Step actually taken (the request clipped by the stability bounds).
        dt: f64,
        dt_next: f64,
        error: f64,
    },
    Rejected {
        dt_next: f64,
        error: f64,
    },
}

/// Stability bounds at the current state: `1 / max|K|` and the time for
/// the fastest-closing neighbour pair to close half its gap.
fn stability_limit(state: &LagrangianState, rates: &Rates) -> f64 {
    let kmax = rates.gradient.iter().fold(0.0f64, |a, &k| a.max(k.abs()));
    let mut limit = if kmax > 0.0 { 1.0 / kmax } else { f64::INFINITY };
    for i in 0..state.len().saturating_sub(1) {
        let closing = rates.velocity[i] - rates.velocity[i + 1];
        if closing > 0.0 {
            limit = limit.min(0.5 * (state.phi[i + 1] - state.phi[i]) / closing);
        }
    }
    limit
}

/// Attempts one step of at most `dt` from `state`, whose rates are
/// `rates`. The error estimate compares one full step with two half steps
/// and the two-half-step result is kept.
pub fn advance_step_with_rates(
    state: &LagrangianState,
    rates: &Rates,
    params: &ModelParams,
    ctrl: &StepControl,
    dt: f64,
) -> std::result::Result<StepOutcome, StepError> {
    let n = state.len();
    let dt = dt.min(ctrl.dt_safety * stability_limit(state, rates));
    let y = pack(state);
    let k1 = &rates.flat;
    let mut ws = Workspace::new(n);
    let mut f = |y: &[f64], dy: &mut [f64]| eval_rates(state.frame, params, &state.rho, y, dy, &mut ws);

    let full = rk4_from(&y, k1, dt, &mut f);
    let half = rk4_from(&y, k1, 0.5 * dt, &mut f);
    let (full, half) = match (full, half) {
        (Ok(a), Ok(b)) => (a, b),
        // an intermediate stage left the admissible set: retry smaller
        (Err(StepError::Crossing { .. }) | Err(StepError::OutOfDomain), _)
        | (_, Err(StepError::Crossing { .. }) | Err(StepError::OutOfDomain)) => {
            return Ok(StepOutcome::Rejected { dt_next: 0.25 * dt, error: f64::INFINITY })
        }
        (Err(e), _) | (_, Err(e)) => return Err(e),
    };
    let mut k_half = vec![0.0; 4 * n];
    match f(&half, &mut k_half) {
        Ok(()) => {}
        Err(StepError::Crossing { .. }) | Err(StepError::OutOfDomain) => {
            return Ok(StepOutcome::Rejected { dt_next: 0.25 * dt, error: f64::INFINITY })
        }
        Err(e) => return Err(e),
    }
    let two = match rk4_from(&half, &k_half, 0.5 * dt, &mut f) {
        Ok(v) => v,
        Err(StepError::Crossing { .. }) | Err(StepError::OutOfDomain) => {
            return Ok(StepOutcome::Rejected { dt_next: 0.25 * dt, error: f64::INFINITY })
        }
        Err(e) => return Err(e),
    };

    let relative_positions = state.frame == Frame::XWarmup;
    let mut error = 0.0f64;
    for i in 0..4 * n {
        let floor = if relative_positions && i < n { 0.0 } else { 1.0 };
        let scale = ctrl.rk_tol * y[i].abs().max(two[i].abs()).max(floor);
        error = error.max((two[i] - full[i]).abs() / (15.0 * scale));
    }
    if !error.is_finite() {
        return Err(StepError::Overflow);
    }
    let factor = if error == 0.0 { 5.0 } else { (ctrl.dt_safety * error.powf(-0.2)).clamp(0.2, 5.0) };
    if error > 1.0 {
        return Ok(StepOutcome::Rejected { dt_next: dt * factor.min(0.9), error });
    }
    let next = unpack(state, state.t + dt, &two);
    if let Some(index) = next.first_crossing() {
        return Err(StepError::Crossing { index });
    }
    if state.frame == Frame::XWarmup && !(next.phi[0] > 0.0 && next.phi[n - 1] < 1.0) {
        return Err(StepError::OutOfDomain);
    }
    Ok(StepOutcome::Accepted { state: next, dt, dt_next: dt * factor, error })
}

/// [`advance_step_with_rates`] with the rates evaluated here.
pub fn advance_step(
    state: &LagrangianState,
    params: &ModelParams,
    ctrl: &StepControl,
    dt: f64,
) -> std::result::Result<StepOutcome, StepError> {
    let rates = rhs_eval(state, params)?;
    advance_step_with_rates(state, &rates, params, ctrl, dt)
}

/// Inserts a marker at the midpoint label of every interval whose position
/// gap exceeds `h_max` or whose vorticity jump exceeds `refine_tol sup omega`,
/// up to `max_markers`. New markers get the exact initial density, `phi`,
/// `D`, `W` by monotone cubic interpolation in the label, and
/// `omega = rho W`.
pub fn refine_markers(state: &LagrangianState, ctrl: &StepControl, spec: &InitialDataSpec) -> LagrangianState {
    let n = state.len();
    let sup = state.sup_omega();
    let budget = ctrl.max_markers.saturating_sub(n);
    let mut flagged = Vec::new();
    for i in 0..n - 1 {
        if flagged.len() >= budget {
            break;
        }
        let gap = state.phi[i + 1] - state.phi[i];
        let jump = (state.omega[i + 1] - state.omega[i]).abs();
        let label_gap = state.label[i + 1] - state.label[i];
        let resolvable = label_gap > 1e-12 * state.label[i + 1].abs().max(1.0);
        if resolvable && (gap > ctrl.h_max || (sup > 0.0 && jump > ctrl.refine_tol * sup)) {
            flagged.push(i);
        }
    }
    if flagged.is_empty() {
        return state.clone();
    }
    let m = n + flagged.len();
    let mut out = LagrangianState {
        t: state.t,
        frame: state.frame,
        label: Vec::with_capacity(m),
        phi: Vec::with_capacity(m),
        rho: Vec::with_capacity(m),
        omega: Vec::with_capacity(m),
        deform: Vec::with_capacity(m),
        forcing: Vec::with_capacity(m),
    };
    let mut next_flag = flagged.iter().peekable();
    for i in 0..n {
        out.label.push(state.label[i]);
        out.phi.push(state.phi[i]);
        out.rho.push(state.rho[i]);
        out.omega.push(state.omega[i]);
        out.deform.push(state.deform[i]);
        out.forcing.push(state.forcing[i]);
        if next_flag.peek() == Some(&&i) {
            next_flag.next();
            let s = 0.5 * (state.label[i] + state.label[i + 1]);
            let rho = spec.rho0(s);
            let w = pchip_at(&state.label, &state.forcing, i, s).max(0.0);
            out.label.push(s);
            out.phi.push(pchip_at(&state.label, &state.phi, i, s));
            out.rho.push(rho);
            out.omega.push(rho * w);
            out.deform.push(pchip_at(&state.label, &state.deform, i, s));
            out.forcing.push(w);
        }
    }
    out
}

/// Options of a run beyond the step controls.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub t_end: f64,
    /// Times the run lands on exactly and emits a frame at.
    pub checkpoints: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub frames: Vec<DiagnosticsFrame>,
    pub final_state: LagrangianState,
    pub cause: Termination,
    /// Human-readable detail on the termination.
    pub detail: String,
    pub steps: usize,
    pub rejected: usize,
    pub initial_markers: usize,
}

impl RunOutput {
    pub fn min_k(&self) -> f64 {
        self.frames.iter().map(|f| f.min_k).filter(|k| !k.is_nan()).fold(f64::INFINITY, f64::min)
    }
}

const CROSSING_RETRIES: usize = 10;

/// Runs to `t_end` and returns the frames, final state and cause.
pub fn run_simulation(
    params: &ModelParams,
    spec: &InitialDataSpec,
    ctrl: &StepControl,
    t_end: f64,
) -> Result<RunOutput> {
    let opts = RunOptions { t_end, checkpoints: Vec::new() };
    run_simulation_observed(params, spec, ctrl, &opts, |_, _| {})
}

/// As [`run_simulation`], calling `observer` with the state behind every
/// emitted frame.
pub fn run_simulation_observed<O>(
    params: &ModelParams,
    spec: &InitialDataSpec,
    ctrl: &StepControl,
    opts: &RunOptions,
    mut observer: O,
) -> Result<RunOutput>
where
    O: FnMut(&LagrangianState, &DiagnosticsFrame),
{
    ctrl.validate()?;
    if !(opts.t_end > 0.0) {
        return Err(Error::config("t_end > 0", format!("t_end = {}", opts.t_end)));
    }
    let mut state = build_initial_state(spec, params)?;
    let initial_markers = state.len();
    let mut checkpoints: Vec<f64> = opts.checkpoints.iter().copied().filter(|&t| t > 0.0 && t < opts.t_end).collect();
    checkpoints.sort_by(f64::total_cmp);
    checkpoints.dedup();
    let mut next_cp = 0;

    let mut rates = rhs_eval(&state, params).map_err(|e| Error::Internal(format!("initial state: {e}")))?;
    let mut running = RunningIntegrals::new(state.t, indicator_sups(&state, &rates.velocity, &rates.gradient));
    let mut frames = Vec::new();
    let mut emit = |state: &LagrangianState,
                    rates: &Rates,
                    running: &mut RunningIntegrals,
                    dt: f64,
                    frames: &mut Vec<DiagnosticsFrame>| {
        let mut frame = compute_frame_with(state, params, spec, running, &rates.velocity, &rates.gradient);
        frame.dt = dt;
        observer(state, &frame);
        frames.push(frame);
    };
    emit(&state, &rates, &mut running, 0.0, &mut frames);

    let mut dt = ctrl.dt_init;
    let mut last_dt = 0.0;
    let mut steps = 0usize;
    let mut rejected = 0usize;
    let mut since_frame = 0usize;
    let mut crossing_retries = 0usize;
    let (cause, detail) = loop {
        if state.t >= opts.t_end {
            break (Termination::Horizon, format!("reached t_end = {}", opts.t_end));
        }
        let target = checkpoints.get(next_cp).copied().unwrap_or(opts.t_end);
        let mut trial = dt;
        let landing = state.t + trial >= target;
        if landing {
            trial = target - state.t;
        }
        if trial < ctrl.dt_min && !landing {
            break (Termination::StepUnderflow, format!("step {trial:e} below dt_min at t = {:e}", state.t));
        }
        match advance_step_with_rates(&state, &rates, params, ctrl, trial) {
            Ok(StepOutcome::Accepted { state: next, dt: taken, dt_next, .. }) => {
                let landed = landing && taken == trial;
                let mut next = next;
                if landed {
                    // snap onto the checkpoint despite rounding in t + dt
                    next.t = target;
                }
                steps += 1;
                crossing_retries = 0;
                last_dt = taken;
                dt = if landed { dt.max(dt_next) } else { dt_next };
                let refined = refine_markers(&next, ctrl, spec);
                state = refined;
                rates = match rhs_eval(&state, params) {
                    Ok(r) => r,
                    Err(StepError::Overflow) => {
                        break (Termination::Overflow, format!("overflow at t = {:e}", state.t))
                    }
                    Err(e) => break (Termination::Crossing, format!("{e} at t = {:e}", state.t)),
                };
                running.accumulate(state.t, indicator_sups(&state, &rates.velocity, &rates.gradient));
                since_frame += 1;
                let at_checkpoint = landed && next_cp < checkpoints.len();
                if at_checkpoint {
                    next_cp += 1;
                }
                let capped = state.sup_omega() >= ctrl.omega_cap;
                let done = capped || state.t >= opts.t_end;
                if since_frame >= ctrl.frame_stride || at_checkpoint || done {
                    emit(&state, &rates, &mut running, last_dt, &mut frames);
                    since_frame = 0;
                }
                if capped {
                    break (
                        Termination::OmegaCap,
                        format!("sup omega = {:e} reached the cap at t = {:e}", state.sup_omega(), state.t),
                    );
                }
            }
            Ok(StepOutcome::Rejected { dt_next, .. }) => {
                rejected += 1;
                dt = dt_next;
                if dt < ctrl.dt_min {
                    break (Termination::StepUnderflow, format!("step {dt:e} below dt_min at t = {:e}", state.t));
                }
            }
            Err(StepError::Crossing { .. }) if crossing_retries < CROSSING_RETRIES => {
                crossing_retries += 1;
                rejected += 1;
                dt = 0.5 * trial.min(dt);
                if dt < ctrl.dt_min {
                    break (Termination::StepUnderflow, format!("step {dt:e} below dt_min at t = {:e}", state.t));
                }
            }
            Err(StepError::OutOfDomain) if crossing_retries < CROSSING_RETRIES => {
                crossing_retries += 1;
                rejected += 1;
                dt = 0.5 * trial.min(dt);
            }
            Err(StepError::Overflow) => break (Termination::Overflow, format!("overflow at t = {:e}", state.t)),
            Err(e) => break (Termination::Crossing, format!("{e} at t = {:e}", state.t)),
        }
    };
    if frames.last().is_none_or(|f| f.t < state.t) {
        emit(&state, &rates, &mut running, last_dt, &mut frames);
    }
    Ok(RunOutput { frames, final_state: state, cause, detail, steps, rejected, initial_markers })
}
