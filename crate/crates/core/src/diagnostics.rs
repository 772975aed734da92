//! Blow-up indicators per frame, and the checks that compare a run against
//! the positivity window, the trajectory barrier and the co-divergence of
//! the indicators.

use serde::Serialize;

use crate::biotsavart::{build_prefix_table, velocity_and_dx_x, velocity_and_stretch_z};
use crate::error::Result;
use crate::interp::linear_at;
use crate::model::{Frame, InitialDataSpec, LagrangianState, ModelParams};
use crate::oracles::{solve_gamma, OracleCurve};
use crate::solver::Termination;

/// `quality` bit: the evolved deformation disagrees with finite differences
/// of the positions by more than [`D_CONSISTENCY_TOL`] where the mesh is
/// locally smooth.
pub const QUALITY_D_MISMATCH: u32 = 1;
pub const D_CONSISTENCY_TOL: f64 = 0.02;

/// Indicators of one frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsFrame {
    pub t: f64,
    /// Distance of the support of `(omega, rho)` to the origin, in `x`.
    pub delta_x: f64,
    /// Running maximum of `-ln delta_x`.
    pub psi: f64,
    pub sup_omega: f64,
    pub sup_dzrho: f64,
    pub sup_dxrho: f64,
    pub sup_dxu: f64,
    /// Extremes of the stretching quantity over the positivity window;
    /// NaN on the unit interval.
    pub min_k: f64,
    pub max_k: f64,
    pub min_d: f64,
    pub i_omega: f64,
    pub i_drho: f64,
    pub i_dxu: f64,
    /// Last accepted step.
    pub dt: f64,
    pub quality: u32,
    pub n_markers: usize,
}

/// Sup-norms entering the time integrals.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sups {
    pub sup_omega: f64,
    pub sup_dzrho: f64,
    pub sup_dxrho: f64,
    pub sup_dxu: f64,
}

/// Sup-norms at `state`, with `velocity` and `gradient` the frame velocity
/// and its derivative (the stretching rate `K` in the log frame) at the
/// markers.
///
/// In the log frame `u_x = K - u_z`; density gradients come from
/// neighbour differences in `phi` and the chain rule `d/dx = -e^z d/dz`.
pub fn indicator_sups(state: &LagrangianState, velocity: &[f64], gradient: &[f64]) -> Sups {
    let sup_omega = state.sup_omega();
    let mut sup_dzrho = 0.0f64;
    let mut sup_dxrho = 0.0f64;
    for i in 0..state.len().saturating_sub(1) {
        let slope = ((state.rho[i + 1] - state.rho[i]) / (state.phi[i + 1] - state.phi[i])).abs();
        if slope == 0.0 {
            continue;
        }
        let mid = 0.5 * (state.phi[i] + state.phi[i + 1]);
        let (dz, dx) = match state.frame {
            Frame::ZModel => (slope, slope * mid.exp()),
            Frame::XWarmup => (slope * mid, slope),
        };
        sup_dzrho = sup_dzrho.max(dz);
        sup_dxrho = sup_dxrho.max(dx);
    }
    let sup_dxu = match state.frame {
        Frame::ZModel => velocity.iter().zip(gradient).fold(0.0f64, |a, (u, k)| a.max((k - u).abs())),
        Frame::XWarmup => gradient.iter().fold(0.0f64, |a, g| a.max(g.abs())),
    };
    Sups { sup_omega, sup_dzrho, sup_dxrho, sup_dxu }
}

/// Trapezoid-in-time integrals of `sup omega`, `sup |rho_x|`, `sup |u_x|`,
/// advanced at every accepted step, and the running maximum `psi`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningIntegrals {
    pub t: f64,
    last: Sups,
    pub i_omega: f64,
    pub i_drho: f64,
    pub i_dxu: f64,
    pub psi: f64,
}

impl RunningIntegrals {
    pub fn new(t0: f64, sups: Sups) -> Self {
        RunningIntegrals { t: t0, last: sups, i_omega: 0.0, i_drho: 0.0, i_dxu: 0.0, psi: f64::NEG_INFINITY }
    }

    pub fn accumulate(&mut self, t: f64, sups: Sups) {
        let h = 0.5 * (t - self.t);
        self.i_omega += h * (self.last.sup_omega + sups.sup_omega);
        self.i_drho += h * (self.last.sup_dxrho + sups.sup_dxrho);
        self.i_dxu += h * (self.last.sup_dxu + sups.sup_dxu);
        self.t = t;
        self.last = sups;
    }
}

/// Position of the support edge nearest the origin: `(delta_x, -ln delta_x)`.
/// The support of the piecewise-linear fields reaches the first zero marker
/// beyond the last nonzero one. An empty support gives `delta_x = 1`.
pub fn support_edge(state: &LagrangianState) -> (f64, f64) {
    let nonzero = |i: usize| state.rho[i] > 0.0 || state.omega[i] > 0.0;
    let n = state.len();
    match state.frame {
        Frame::ZModel => match (0..n).rev().find(|&i| nonzero(i)) {
            Some(i) => {
                let z = state.phi[(i + 1).min(n - 1)];
                ((-z).exp(), z)
            }
            None => (1.0, 0.0),
        },
        Frame::XWarmup => match (0..n).find(|&i| nonzero(i)) {
            Some(i) => {
                let x = state.phi[i.saturating_sub(1)];
                (x, -x.ln())
            }
            None => (1.0, 0.0),
        },
    }
}

/// Largest relative gap between the evolved `D` and the centred difference
/// of `phi` in the label, over markers whose neighbourhood is smooth
/// (label gaps within a factor 2, neighbouring `D` within 25%).
pub fn d_consistency(state: &LagrangianState) -> f64 {
    let (l, p, d) = (&state.label, &state.phi, &state.deform);
    let mut worst = 0.0f64;
    for i in 1..state.len().saturating_sub(1) {
        let (hl, hr) = (l[i] - l[i - 1], l[i + 1] - l[i]);
        let ratio = hr / hl;
        let smooth = (0.5..=2.0).contains(&ratio)
            && (0.8..=1.25).contains(&(d[i - 1] / d[i]))
            && (0.8..=1.25).contains(&(d[i + 1] / d[i]));
        if smooth {
            let fd = (p[i + 1] - p[i - 1]) / (l[i + 1] - l[i - 1]);
            worst = worst.max((fd - d[i]).abs() / d[i]);
        }
    }
    worst
}

/// Frame from precomputed velocity and gradient at the markers; advances
/// `running.psi`.
pub fn compute_frame_with(
    state: &LagrangianState,
    params: &ModelParams,
    spec: &InitialDataSpec,
    running: &mut RunningIntegrals,
    velocity: &[f64],
    gradient: &[f64],
) -> DiagnosticsFrame {
    let sups = indicator_sups(state, velocity, gradient);
    let (delta_x, edge) = support_edge(state);
    running.psi = running.psi.max(edge);
    let (min_k, max_k) = match state.frame {
        Frame::ZModel => {
            let w = positivity_from_gradient(state, params, spec, gradient);
            (w.min_k, w.max_k)
        }
        Frame::XWarmup => (f64::NAN, f64::NAN),
    };
    let quality = if d_consistency(state) > D_CONSISTENCY_TOL { QUALITY_D_MISMATCH } else { 0 };
    DiagnosticsFrame {
        t: state.t,
        delta_x,
        psi: running.psi,
        sup_omega: sups.sup_omega,
        sup_dzrho: sups.sup_dzrho,
        sup_dxrho: sups.sup_dxrho,
        sup_dxu: sups.sup_dxu,
        min_k,
        max_k,
        min_d: state.deform.iter().copied().fold(f64::INFINITY, f64::min),
        i_omega: running.i_omega,
        i_drho: running.i_drho,
        i_dxu: running.i_dxu,
        dt: 0.0,
        quality,
        n_markers: state.len(),
    }
}

/// Velocity and gradient at the markers of `state`.
pub fn marker_velocity(state: &LagrangianState, params: &ModelParams) -> Result<(Vec<f64>, Vec<f64>)> {
    let table = build_prefix_table(state)?;
    let (mut u, mut g) = (Vec::new(), Vec::new());
    match state.frame {
        Frame::ZModel => velocity_and_stretch_z(&table, &state.phi, params, &mut u, &mut g),
        Frame::XWarmup => velocity_and_dx_x(&table, &state.phi, params, &mut u, &mut g)?,
    }
    Ok((u, g))
}

/// Frame of `state`, evaluating the velocity law here. The running
/// integrals must already include `state.t`.
pub fn compute_frame(
    state: &LagrangianState,
    params: &ModelParams,
    spec: &InitialDataSpec,
    running: &mut RunningIntegrals,
) -> Result<DiagnosticsFrame> {
    let (u, g) = marker_velocity(state, params)?;
    Ok(compute_frame_with(state, params, spec, running, &u, &g))
}

/// Stretching quantity over the positivity window, and the plateau lower
/// bound `K >= c W` with `c = 2 e^{-gamma1-gamma2} - 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositivityReport {
    /// Window `[L1, hi)` in labels; `hi` is the label reaching
    /// `phi(L4) + gamma1`, or infinite beyond the marker range.
    pub window: (f64, f64),
    pub n_window: usize,
    pub min_k: f64,
    pub max_k: f64,
    /// `1e-10 sup omega`
    pub tol_k: f64,
    pub pass: bool,
    /// `min (K - c W)` over labels in `[L2, L3]`.
    pub plateau_slack: f64,
    /// `1e-6 (1 + sup K)`
    pub plateau_tol: f64,
    pub plateau_pass: bool,
}

fn positivity_from_gradient(
    state: &LagrangianState,
    params: &ModelParams,
    spec: &InitialDataSpec,
    k: &[f64],
) -> PositivityReport {
    let phi_l4 = linear_at(&state.label, &state.phi, spec.l4).unwrap_or(f64::INFINITY);
    let hi = linear_at(&state.phi, &state.label, phi_l4 + params.gamma1).unwrap_or(f64::INFINITY);
    let (mut min_k, mut max_k, mut n_window) = (f64::INFINITY, f64::NEG_INFINITY, 0);
    let c = params.stretch_constant();
    let mut plateau_slack = f64::INFINITY;
    let mut sup_k = 0.0f64;
    for i in 0..state.len() {
        let l = state.label[i];
        sup_k = sup_k.max(k[i]);
        if l >= spec.l1 && l < hi {
            min_k = min_k.min(k[i]);
            max_k = max_k.max(k[i]);
            n_window += 1;
        }
        if l >= spec.l2 && l <= spec.l3 {
            plateau_slack = plateau_slack.min(k[i] - c * state.forcing[i]);
        }
    }
    if n_window == 0 {
        (min_k, max_k) = (f64::NAN, f64::NAN);
    }
    let tol_k = 1e-10 * state.sup_omega();
    let plateau_tol = 1e-6 * (1.0 + sup_k);
    PositivityReport {
        window: (spec.l1, hi),
        n_window,
        min_k,
        max_k,
        tol_k,
        pass: n_window == 0 || min_k >= -tol_k,
        plateau_slack,
        plateau_tol,
        plateau_pass: !(plateau_slack < -plateau_tol),
    }
}

/// Evaluates the stretching quantity on the positivity window of a log-frame
/// state.
pub fn check_positivity_window(
    state: &LagrangianState,
    params: &ModelParams,
    spec: &InitialDataSpec,
) -> Result<PositivityReport> {
    let (_, k) = marker_velocity(state, params)?;
    Ok(positivity_from_gradient(state, params, spec, &k))
}

/// Barrier curve at one probe label.
#[derive(Debug, Clone)]
pub struct GammaProbe {
    pub label: f64,
    pub curve: OracleCurve,
}

/// `count` probes evenly spaced on `[lo, hi]`.
pub fn gamma_probes(lo: f64, hi: f64, count: usize, tol: f64) -> Result<Vec<GammaProbe>> {
    (0..count)
        .map(|k| {
            let label = if count == 1 { lo } else { lo + (hi - lo) * k as f64 / (count - 1) as f64 };
            Ok(GammaProbe { label, curve: solve_gamma(label, tol)? })
        })
        .collect()
}

/// Relative slack of the barrier comparison.
pub const GAMMA_SLACK: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaBoundReport {
    pub checked: usize,
    /// Probes outside the marker label range.
    pub skipped: Vec<f64>,
    /// Largest `phi / Gamma` among checked probes.
    pub worst_ratio: f64,
    pub pass: bool,
}

/// `phi(z, t) <= Gamma(z, t) (1 + 1e-3)` at every probe with
/// `t <= 0.9 t*(z)`.
pub fn check_gamma_bound(state: &LagrangianState, probes: &[GammaProbe]) -> GammaBoundReport {
    let mut report = GammaBoundReport { checked: 0, skipped: Vec::new(), worst_ratio: 0.0, pass: true };
    for p in probes {
        let Some(phi) = linear_at(&state.label, &state.phi, p.label) else {
            report.skipped.push(p.label);
            continue;
        };
        let horizon = 0.9 * p.curve.blowup_time.unwrap_or(f64::INFINITY);
        if state.t > horizon {
            continue;
        }
        let Some(gamma) = p.curve.value_at(state.t) else {
            continue;
        };
        report.checked += 1;
        let ratio = phi / gamma;
        report.worst_ratio = report.worst_ratio.max(ratio);
        if ratio > 1.0 + GAMMA_SLACK {
            report.pass = false;
        }
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Blowup,
    RegularHorizon,
    Aborted,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::Blowup => "blowup",
            Classification::RegularHorizon => "regular_horizon",
            Classification::Aborted => "aborted",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlowupReport {
    pub classification: Classification,
    pub t_est: Option<f64>,
    /// Least-squares slope of `ln sup omega` against `ln t` on the fit window.
    pub loglog_slope: Option<f64>,
    pub fit_frames: usize,
    pub reason: String,
    pub final_sup_omega: f64,
    pub final_delta_x: f64,
    pub final_integrals: [f64; 3],
}

/// Slope and intercept of the least-squares line through `(x, y)`.
fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len() as f64;
    if x.len() < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

pub const MIN_FRAMES: usize = 8;
const GROWTH_SLOPE: f64 = 1.5;

/// Classifies a run from its frames and termination cause.
///
/// A blow-up needs a blow-up proxy as cause and super-linear growth over the
/// last decade of `sup omega` (frames within a factor 10 of the final
/// value): log-log slope above 1.5 and a reciprocal `1 / sup omega`
/// decreasing towards zero, whose linear extrapolation gives `T_est`.
pub fn detect_blowup(frames: &[DiagnosticsFrame], cause: Termination) -> BlowupReport {
    let last = frames.last();
    let mut report = BlowupReport {
        classification: Classification::Aborted,
        t_est: None,
        loglog_slope: None,
        fit_frames: 0,
        reason: String::new(),
        final_sup_omega: last.map_or(f64::NAN, |f| f.sup_omega),
        final_delta_x: last.map_or(f64::NAN, |f| f.delta_x),
        final_integrals: last.map_or([f64::NAN; 3], |f| [f.i_omega, f.i_drho, f.i_dxu]),
    };
    // reaching the horizon needs no growth fit, so no minimum frame count
    if cause == Termination::Horizon && !frames.is_empty() {
        let bounded = frames.iter().all(|f| f.sup_omega.is_finite() && f.i_omega.is_finite());
        if bounded {
            report.classification = Classification::RegularHorizon;
            report.reason = "reached the horizon with bounded indicators".into();
        } else {
            report.reason = "reached the horizon with non-finite indicators".into();
        }
        return report;
    }
    if frames.len() < MIN_FRAMES {
        report.reason = format!("{} frames, estimator needs at least {MIN_FRAMES}", frames.len());
        return report;
    }
    let last = last.unwrap();

    let usable: Vec<&DiagnosticsFrame> = frames.iter().filter(|f| f.t > 0.0 && f.sup_omega > 0.0).collect();
    let mut window: Vec<&DiagnosticsFrame> =
        usable.iter().copied().filter(|f| f.sup_omega >= 0.1 * last.sup_omega).collect();
    if window.len() < 4 {
        window = usable.iter().rev().take(4).rev().copied().collect();
    }
    report.fit_frames = window.len();
    let lt: Vec<f64> = window.iter().map(|f| f.t.ln()).collect();
    let lw: Vec<f64> = window.iter().map(|f| f.sup_omega.ln()).collect();
    let t: Vec<f64> = window.iter().map(|f| f.t).collect();
    let inv: Vec<f64> = window.iter().map(|f| 1.0 / f.sup_omega).collect();
    let slope = linear_fit(&lt, &lw).map(|(s, _)| s);
    let t_est = linear_fit(&t, &inv).and_then(|(b, a)| (b < 0.0).then(|| -a / b)).filter(|v| v.is_finite() && *v > 0.0);
    report.loglog_slope = slope;
    let growth = slope.is_some_and(|s| s > GROWTH_SLOPE) && t_est.is_some();

    if !cause.is_blowup_proxy() {
        report.reason = format!("run ended by {cause}");
        return report;
    }
    if growth {
        report.classification = Classification::Blowup;
        report.t_est = t_est;
        report.reason = format!("{cause} with super-linear growth of sup omega");
    } else {
        report.reason = format!("{cause} without a growth signature (slope {slope:?})");
    }
    report
}

/// Co-divergence of the time-integrated indicators and monotone decay of
/// the support distance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BkmReport {
    pub half_time: f64,
    /// `I(final) / I(half)` for `I_omega`, `I_drho`, `I_dxu`.
    pub ratios: [f64; 3],
    pub delta_decreasing: bool,
    pub pass: bool,
}

pub fn bkm_codivergence(frames: &[DiagnosticsFrame]) -> Option<BkmReport> {
    let last = frames.last()?;
    let half_time = 0.5 * last.t;
    let half = frames.iter().rev().find(|f| f.t <= half_time)?;
    let ratio = |a: f64, b: f64| {
        if b > 0.0 {
            a / b
        } else if a > 0.0 {
            f64::INFINITY
        } else {
            f64::NAN
        }
    };
    let ratios = [ratio(last.i_omega, half.i_omega), ratio(last.i_drho, half.i_drho), ratio(last.i_dxu, half.i_dxu)];
    let delta_decreasing = frames.windows(2).all(|w| w[1].delta_x < w[0].delta_x);
    Some(BkmReport { half_time, ratios, delta_decreasing, pass: delta_decreasing && ratios.iter().all(|r| *r > 10.0) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_initial_state, make_params};

    fn synthetic(ts: &[f64], w: impl Fn(f64) -> f64) -> Vec<DiagnosticsFrame> {
        ts.iter()
            .map(|&t| DiagnosticsFrame {
                t,
                delta_x: 0.5,
                psi: 0.0,
                sup_omega: w(t),
                sup_dzrho: 0.0,
                sup_dxrho: 0.0,
                sup_dxu: 0.0,
                min_k: 0.0,
                max_k: 0.0,
                min_d: 1.0,
                i_omega: 0.0,
                i_drho: 0.0,
                i_dxu: 0.0,
                dt: 0.0,
                quality: 0,
                n_markers: 0,
            })
            .collect()
    }

    #[test]
    fn initial_frame_of_desk_ladder() {
        let p = make_params(1.2, 0.9, None).unwrap();
        let s = InitialDataSpec { n_markers: 512, ..Default::default() };
        let state = build_initial_state(&s, &p).unwrap();
        let (u, g) = marker_velocity(&state, &p).unwrap();
        let mut running = RunningIntegrals::new(0.0, indicator_sups(&state, &u, &g));
        let f = compute_frame(&state, &p, &s, &mut running).unwrap();
        assert!((f.delta_x - (-14.0f64).exp()).abs() < 1e-20);
        assert!((f.delta_x - 8.3153e-7).abs() < 1e-10);
        assert_eq!((f.i_omega, f.i_drho, f.i_dxu), (0.0, 0.0, 0.0));
        assert_eq!((f.min_k, f.max_k), (0.0, 0.0));
        assert_eq!(f.quality, 0);
        let pos = check_positivity_window(&state, &p, &s).unwrap();
        assert!(pos.pass && pos.plateau_pass);
    }

    #[test]
    fn constant_vorticity_is_positive_on_window() {
        let p = make_params(1.2, 0.9, None).unwrap();
        let s = InitialDataSpec { n_markers: 512, ..Default::default() };
        let mut state = build_initial_state(&s, &p).unwrap();
        state.omega.iter_mut().for_each(|w| *w = 3.0);
        let r = check_positivity_window(&state, &p, &s).unwrap();
        assert!(r.pass);
        assert!((r.min_k - 3.0).abs() < 1e-12 && (r.max_k - 3.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_bound_at_rest() {
        let p = make_params(1.2, 0.9, None).unwrap();
        let s = InitialDataSpec { n_markers: 256, ..Default::default() };
        let state = build_initial_state(&s, &p).unwrap();
        let probes = gamma_probes(1.0, 14.0, 4, 1e-10).unwrap();
        let r = check_gamma_bound(&state, &probes);
        assert!(r.pass);
        assert_eq!(r.checked, 4);
        assert!((r.worst_ratio - 1.0).abs() < 1e-12);
        let far = gamma_probes(20.0, 20.0, 1, 1e-10).unwrap();
        assert_eq!(check_gamma_bound(&state, &far).skipped, vec![20.0]);
    }

    #[test]
    fn reciprocal_growth_is_blowup() {
        let ts: Vec<f64> = (0..=56).map(|k| 0.15 + 0.0025 * k as f64).collect();
        let frames = synthetic(&ts, |t| 1.0 / (0.3 - t));
        let r = detect_blowup(&frames, Termination::OmegaCap);
        assert_eq!(r.classification, Classification::Blowup);
        let t = r.t_est.unwrap();
        assert!((t - 0.3).abs() <= 0.02 * 0.3, "{t}");
    }

    #[test]
    fn flat_and_crossing_cases() {
        let ts: Vec<f64> = (1..=20).map(|k| k as f64 * 0.1).collect();
        let frames = synthetic(&ts, |_| 1.0);
        let r = detect_blowup(&frames, Termination::Horizon);
        assert_eq!(r.classification, Classification::RegularHorizon);
        assert!(r.t_est.is_none());
        assert_eq!(detect_blowup(&frames, Termination::Crossing).classification, Classification::Aborted);
        let short = detect_blowup(&frames[..5], Termination::OmegaCap);
        assert_eq!(short.classification, Classification::Aborted);
        assert!(short.reason.contains("at least"));
        let short = detect_blowup(&frames[..3], Termination::Horizon);
        assert_eq!(short.classification, Classification::RegularHorizon);
    }
}
