//! Model parameters, smooth initial data, coordinate frames and the marker
//! state shared by the solver, the diagnostics and the oracles.
//!
//! Two frames are supported. The `z` frame (`z = -ln x`) carries the general
//! two-parameter model, in which trajectories that reach `z = +inf` correspond
//! to the support touching the origin. The `x` frame carries the sign-definite
//! warm-up model on the unit interval (and, for completeness, the general
//! velocity law written in `x`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kernel parameters of the velocity law and the quantities derived from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub beta1: f64,
    pub beta2: f64,
    /// `ln beta1`
    pub gamma1: f64,
    /// `ln(1 / beta2)`
    pub gamma2: f64,
    /// Margin with `2 exp(-gamma1 - gamma2 - epsilon) > 1`. Absent outside the
    /// blow-up range unless given explicitly.
    pub epsilon: Option<f64>,
    /// `beta1 < 2 beta2`
    pub blow_up_range: bool,
}

impl ModelParams {
    /// `2 exp(-gamma1 - gamma2) - 1`, the lower-bound constant of the
    /// stretching quantity on the plateau. Positive exactly in the blow-up range.
    pub fn stretch_constant(&self) -> f64 {
        2.0 * (-self.gamma1 - self.gamma2).exp() - 1.0
    }

    /// `beta1 == beta2 == 1`
    pub fn is_sign_definite(&self) -> bool {
        self.beta1 == 1.0 && self.beta2 == 1.0
    }
}

/// Builds [`ModelParams`] from the two kernel parameters.
///
/// When `epsilon` is omitted inside the blow-up range it defaults to half the
/// available margin, `(ln 2 - gamma1 - gamma2) / 2`.
pub fn make_params(beta1: f64, beta2: f64, epsilon: Option<f64>) -> Result<ModelParams> {
    if !(beta1.is_finite() && beta2.is_finite()) {
        return Err(Error::config("finite betas", format!("beta1 = {beta1}, beta2 = {beta2}")));
    }
    if beta2 <= 0.0 {
        return Err(Error::config("0 < beta2", format!("beta2 = {beta2}")));
    }
    if beta2 > 1.0 {
        return Err(Error::config("beta2 <= 1", format!("beta2 = {beta2}")));
    }
    if beta1 < 1.0 {
        return Err(Error::config("1 <= beta1", format!("beta1 = {beta1}")));
    }
    let gamma1 = beta1.ln();
    let gamma2 = -beta2.ln();
    let blow_up_range = beta1 < 2.0 * beta2;
    let margin = std::f64::consts::LN_2 - gamma1 - gamma2;

    let epsilon = match epsilon {
        Some(eps) => {
            if !(eps > 0.0) || !eps.is_finite() {
                return Err(Error::config("epsilon > 0", format!("epsilon = {eps}")));
            }
            if blow_up_range && !(2.0 * (-gamma1 - gamma2 - eps).exp() > 1.0) {
                return Err(Error::config(
                    "2 exp(-gamma1 - gamma2 - epsilon) > 1",
                    format!("epsilon = {eps}, available margin ln 2 - gamma1 - gamma2 = {margin}"),
                ));
            }
            Some(eps)
        }
        None if blow_up_range => Some(0.5 * margin),
        None => None,
    };

    Ok(ModelParams { beta1, beta2, gamma1, gamma2, epsilon, blow_up_range })
}

/// Coordinate frame of a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    /// Log coordinate `z = -ln x`; forcing `rho e^z`.
    ZModel,
    /// Unit interval; forcing `rho / x`.
    XWarmup,
}

fn default_plateau() -> (f64, f64) {
    (1.0 / 3.0, 2.0 / 3.0)
}

fn default_amplitude() -> f64 {
    1.0
}

/// Description of the smooth initial bump and the marker layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialDataSpec {
    #[serde(rename = "L0")]
    pub l0: f64,
    #[serde(rename = "L1")]
    pub l1: f64,
    #[serde(rename = "L2")]
    pub l2: f64,
    #[serde(rename = "L3")]
    pub l3: f64,
    #[serde(rename = "L4")]
    pub l4: f64,
    pub frame: Frame,
    pub n_markers: usize,
    /// Plateau of the warm-up density, an interval inside (0, 1).
    #[serde(default = "default_plateau")]
    pub warmup_plateau: (f64, f64),
    /// Height of the density plateau. 1 unless overridden; 0 gives the
    /// equilibrium `rho == 0`.
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
}

impl Default for InitialDataSpec {
    /// Desk-scale ladder `L = (2, 8, 9, 12, 14)` in the z frame with 4096 markers.
    fn default() -> Self {
        InitialDataSpec {
            l0: 2.0,
            l1: 8.0,
            l2: 9.0,
            l3: 12.0,
            l4: 14.0,
            frame: Frame::ZModel,
            n_markers: 4096,
            warmup_plateau: default_plateau(),
            amplitude: 1.0,
        }
    }
}

/// Extra label room outside the density support in the z frame.
const Z_MARGIN: f64 = 0.5;
/// Marker density multiplier inside ramp zones.
const RAMP_DENSITY: f64 = 4.0;

impl InitialDataSpec {
    /// Warm-up data on the unit interval with the given plateau.
    pub fn warmup(plateau: (f64, f64), n_markers: usize) -> Self {
        InitialDataSpec { frame: Frame::XWarmup, n_markers, warmup_plateau: plateau, ..InitialDataSpec::default() }
    }

    /// Ramp width below the plateau, `L0 - 1`.
    pub fn ramp_lo(&self) -> f64 {
        self.l0 - 1.0
    }

    /// Ramp width above the plateau, `L4 - L3`.
    pub fn ramp_hi(&self) -> f64 {
        self.l4 - self.l3
    }

    /// Support of the warm-up density: the plateau widened halfway towards
    /// 0 on the left and towards 1 on the right.
    pub fn warmup_support(&self) -> (f64, f64) {
        let (a, b) = self.warmup_plateau;
        (0.5 * a, 0.5 * (1.0 + b))
    }

    /// Checks every constraint on the ladder, the plateau and the marker
    /// count. Errors name the first violated constraint.
    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        if self.n_markers < 64 {
            return Err(Error::config("n_markers >= 64", format!("n_markers = {}", self.n_markers)));
        }
        if !(0.0..=1.0).contains(&self.amplitude) {
            return Err(Error::config("0 <= plateau height <= 1", format!("plateau height = {}", self.amplitude)));
        }
        match self.frame {
            Frame::ZModel => self.validate_ladder(params),
            Frame::XWarmup => {
                let (a, b) = self.warmup_plateau;
                if !(0.0 < a && a < b && b < 1.0) {
                    return Err(Error::config("0 < plateau_lo < plateau_hi < 1", format!("plateau = [{a}, {b}]")));
                }
                Ok(())
            }
        }
    }

    fn validate_ladder(&self, params: &ModelParams) -> Result<()> {
        let ladder = [
            ("1 < L0", 1.0, self.l0),
            ("L0 < L1", self.l0, self.l1),
            ("L1 < L2", self.l1, self.l2),
            ("L2 < L3", self.l2, self.l3),
            ("L3 < L4", self.l3, self.l4),
        ];
        for (name, lo, hi) in ladder {
            if !(lo < hi) || !hi.is_finite() {
                return Err(Error::config(name, format!("{lo} vs {hi}")));
            }
        }
        let quarter = self.l1 / 4.0;
        if self.l0 > quarter {
            return Err(Error::config("L0 <= L1/4", format!("L0 = {}, L1/4 = {quarter}", self.l0)));
        }
        if !(params.gamma1 < quarter) {
            return Err(Error::config("gamma1 < L1/4", format!("gamma1 = {}, L1/4 = {quarter}", params.gamma1)));
        }
        if !(params.gamma2 < quarter) {
            return Err(Error::config("gamma2 < L1/4", format!("gamma2 = {}, L1/4 = {quarter}", params.gamma2)));
        }
        if let Some(eps) = params.epsilon {
            if !(eps < self.l1 / 10.0) {
                return Err(Error::config("epsilon < L1/10", format!("epsilon = {eps}, L1/10 = {}", self.l1 / 10.0)));
            }
        }
        if self.l2 < self.l1 + params.gamma1 {
            return Err(Error::config(
                "L2 >= L1 + gamma1",
                format!("L2 = {}, L1 + gamma1 = {}", self.l2, self.l1 + params.gamma1),
            ));
        }
        Ok(())
    }

    /// Initial density at a label of this frame.
    pub fn rho0(&self, label: f64) -> f64 {
        let bump = match self.frame {
            Frame::ZModel => plateau_bump(label, 1.0, self.l0, self.l3, self.l4),
            Frame::XWarmup => {
                let (a, b) = self.warmup_plateau;
                let (lo, hi) = self.warmup_support();
                plateau_bump(label, lo, a, b, hi)
            }
        };
        self.amplitude * bump
    }

    /// Segment breakpoints of the marker layout and the density weight of
    /// each segment.
    fn layout_segments(&self) -> (Vec<f64>, Vec<f64>) {
        match self.frame {
            Frame::ZModel => {
                let m = Z_MARGIN;
                let points = vec![1.0 - m, 1.0, self.l0, self.l1, self.l2, self.l3, self.l4, self.l4 + m];
                let weights = vec![1.0, RAMP_DENSITY, 1.0, 1.0, 1.0, RAMP_DENSITY, 1.0];
                (points, weights)
            }
            Frame::XWarmup => {
                let (a, b) = self.warmup_plateau;
                let (lo, hi) = self.warmup_support();
                let m = 0.5 * lo.min(1.0 - hi);
                let points = vec![lo - m, lo, a, b, hi, hi + m];
                let weights = vec![1.0, RAMP_DENSITY, 1.0, RAMP_DENSITY, 1.0];
                (points, weights)
            }
        }
    }

    /// Initial marker labels: a uniform base grid with `RAMP_DENSITY` times
    /// the density inside the ramps. Every ladder point is a marker label.
    pub fn marker_labels(&self) -> Vec<f64> {
        let (points, weights) = self.layout_segments();
        let n_seg = weights.len();
        let n_intervals = self.n_markers.saturating_sub(1).max(n_seg);

        let mass: Vec<f64> = (0..n_seg).map(|k| weights[k] * (points[k + 1] - points[k])).collect();
        let total: f64 = mass.iter().sum();

        // Largest-remainder apportionment, at least one interval per segment.
        let spare = n_intervals - n_seg;
        let ideal: Vec<f64> = mass.iter().map(|m| m / total * spare as f64).collect();
        let mut counts: Vec<usize> = ideal.iter().map(|x| 1 + x.floor() as usize).collect();
        let assigned: usize = counts.iter().sum();
        let mut order: Vec<usize> = (0..n_seg).collect();
        order.sort_by(|&i, &j| {
            let ri = ideal[i] - ideal[i].floor();
            let rj = ideal[j] - ideal[j].floor();
            rj.total_cmp(&ri).then(i.cmp(&j))
        });
        for &k in order.iter().take(n_intervals - assigned) {
            counts[k] += 1;
        }

        let mut labels = Vec::with_capacity(n_intervals + 1);
        for k in 0..n_seg {
            let (a, b) = (points[k], points[k + 1]);
            let n = counts[k];
            for j in 0..n {
                labels.push(a + (b - a) * (j as f64 / n as f64));
            }
        }
        labels.push(*points.last().unwrap());
        labels
    }
}

/// `exp(-1/s)` for `s > 0`, else 0.
fn psi(s: f64) -> f64 {
    if s > 0.0 {
        (-1.0 / s).exp()
    } else {
        0.0
    }
}

/// Smooth step from 0 (at `s <= 0`) to 1 (at `s >= 1`), `r(1/2) = 1/2`.
pub fn smooth_step(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        let a = psi(s);
        a / (a + psi(1.0 - s))
    }
}

/// Bump rising on `[lo, a]`, equal to 1 on `[a, b]`, falling on `[b, hi]`.
fn plateau_bump(x: f64, lo: f64, a: f64, b: f64, hi: f64) -> f64 {
    if x <= lo || x >= hi {
        0.0
    } else if x < a {
        smooth_step((x - lo) / (a - lo))
    } else if x <= b {
        1.0
    } else {
        smooth_step((hi - x) / (hi - b))
    }
}

/// One marker, copied out of a [`LagrangianState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Marker {
    pub label: f64,
    pub phi: f64,
    pub rho: f64,
    pub omega: f64,
    pub deform: f64,
    pub forcing: f64,
}

/// Markers stored as parallel arrays, sorted by label.
///
/// `forcing` accumulates `int_0^t e^{phi} ds` in the z frame and
/// `int_0^t 1/phi ds` in the x frame; with zero initial vorticity,
/// `omega == rho * forcing` along every trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianState {
    pub t: f64,
    pub frame: Frame,
    pub label: Vec<f64>,
    pub phi: Vec<f64>,
    pub rho: Vec<f64>,
    pub omega: Vec<f64>,
    pub deform: Vec<f64>,
    pub forcing: Vec<f64>,
}

impl LagrangianState {
    pub fn len(&self) -> usize {
        self.label.len()
    }

    pub fn is_empty(&self) -> bool {
        self.label.is_empty()
    }

    pub fn marker(&self, i: usize) -> Marker {
        Marker {
            label: self.label[i],
            phi: self.phi[i],
            rho: self.rho[i],
            omega: self.omega[i],
            deform: self.deform[i],
            forcing: self.forcing[i],
        }
    }

    pub fn from_markers(t: f64, frame: Frame, markers: &[Marker]) -> Self {
        LagrangianState {
            t,
            frame,
            label: markers.iter().map(|m| m.label).collect(),
            phi: markers.iter().map(|m| m.phi).collect(),
            rho: markers.iter().map(|m| m.rho).collect(),
            omega: markers.iter().map(|m| m.omega).collect(),
            deform: markers.iter().map(|m| m.deform).collect(),
            forcing: markers.iter().map(|m| m.forcing).collect(),
        }
    }

    pub fn sup_omega(&self) -> f64 {
        self.omega.iter().fold(0.0, |acc, &w| acc.max(w))
    }

    /// First index `i` with `phi[i] >= phi[i + 1]`, if any.
    pub fn first_crossing(&self) -> Option<usize> {
        self.phi.windows(2).position(|w| !(w[0] < w[1]))
    }

    /// Verifies the pointwise invariants: ordering, `rho` in [0,1],
    /// `omega >= 0`, `D > 0`, `W >= 0`.
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.len();
        for v in [&self.phi, &self.rho, &self.omega, &self.deform, &self.forcing] {
            if v.len() != n {
                return Err(Error::Internal("marker arrays differ in length".into()));
            }
        }
        if let Some(i) = self.label.windows(2).position(|w| !(w[0] < w[1])) {
            return Err(Error::Internal(format!("labels not increasing at index {i}")));
        }
        if let Some(i) = self.first_crossing() {
            return Err(Error::Internal(format!("positions not increasing at index {i}")));
        }
        for i in 0..n {
            let m = self.marker(i);
            if !(0.0..=1.0).contains(&m.rho) {
                return Err(Error::Internal(format!("rho = {} out of [0,1] at {i}", m.rho)));
            }
            if !(m.omega >= 0.0) {
                return Err(Error::Internal(format!("omega = {} negative at {i}", m.omega)));
            }
            if !(m.deform > 0.0) {
                return Err(Error::Internal(format!("D = {} not positive at {i}", m.deform)));
            }
            if !(m.forcing >= 0.0) {
                return Err(Error::Internal(format!("W = {} negative at {i}", m.forcing)));
            }
        }
        Ok(())
    }
}

/// Initial state: `phi = label`, `omega = W = 0`, `D = 1`, `rho = rho0(label)`.
pub fn build_initial_state(spec: &InitialDataSpec, params: &ModelParams) -> Result<LagrangianState> {
    spec.validate(params)?;
    let label = spec.marker_labels();
    let n = label.len();
    let rho = label.iter().map(|&z| spec.rho0(z)).collect();
    Ok(LagrangianState {
        t: 0.0,
        frame: spec.frame,
        phi: label.clone(),
        label,
        rho,
        omega: vec![0.0; n],
        deform: vec![1.0; n],
        forcing: vec![0.0; n],
    })
}

/// Direction of a coordinate map between the unit interval and the log frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    XToZ,
    ZToX,
}

/// `z = -ln x` for `x` in (0, 1]; `x = e^{-z}` for `z >= 0`.
pub fn frame_transform(value: f64, direction: Direction) -> Result<f64> {
    match direction {
        Direction::XToZ => x_to_z(value),
        Direction::ZToX => z_to_x(value),
    }
}

pub fn x_to_z(x: f64) -> Result<f64> {
    if !(x > 0.0 && x <= 1.0) {
        return Err(Error::Domain(format!("x = {x} outside (0, 1]")));
    }
    Ok(-x.ln())
}

pub fn z_to_x(z: f64) -> Result<f64> {
    if !(z >= 0.0) {
        return Err(Error::Domain(format!("z = {z} outside [0, inf)")));
    }
    Ok((-z).exp())
}

/// Velocity in the log frame from the unit-interval velocity `u` at `x`.
pub fn velocity_x_to_z(u: f64, x: f64) -> f64 {
    -u / x
}

/// Unit-interval velocity from the log-frame velocity at `z`.
pub fn velocity_z_to_x(u_z: f64, z: f64) -> f64 {
    -u_z * (-z).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn params_unit_betas() {
        let p = make_params(1.0, 1.0, None).unwrap();
        assert_eq!(p.gamma1, 0.0);
        assert_eq!(p.gamma2, 0.0);
        assert!(p.blow_up_range);
        assert!(p.is_sign_definite());
    }

    #[test]
    fn params_desk_values() {
        let p = make_params(1.2, 0.9, None).unwrap();
        assert!(close(p.gamma1, 0.1823216, 1e-7));
        assert!(close(p.gamma2, 0.1053605, 1e-7));
        assert!(p.blow_up_range);
        assert!(close(p.epsilon.unwrap(), 0.2027326, 1e-7));
        assert!(close(p.epsilon.unwrap(), 1.5f64.ln() / 2.0, 1e-14));
        assert!(2.0 * (-p.gamma1 - p.gamma2 - p.epsilon.unwrap()).exp() > 1.0);
    }

    #[test]
    fn params_outside_range() {
        let p = make_params(2.5, 1.0, None).unwrap();
        assert!(!p.blow_up_range);
        assert_eq!(p.epsilon, None);
        // boundary beta1 == 2 beta2 is outside
        assert!(!make_params(1.6, 0.8, None).unwrap().blow_up_range);
    }

    #[test]
    fn params_rejections() {
        assert!(matches!(make_params(1.0, 1.5, None), Err(Error::Config { .. })));
        assert!(matches!(make_params(0.9, 0.5, None), Err(Error::Config { .. })));
        assert!(matches!(make_params(1.0, 0.0, None), Err(Error::Config { .. })));
        assert!(matches!(make_params(1.0, -0.3, None), Err(Error::Config { .. })));
        // explicit epsilon beyond the margin ln 1.5
        let err = make_params(1.2, 0.9, Some(0.5)).unwrap_err();
        assert!(err.to_string().contains("2 exp(-gamma1 - gamma2 - epsilon) > 1"));
        assert!(make_params(1.2, 0.9, Some(0.4)).is_ok());
    }

    #[test]
    fn rho0_values() {
        let spec = InitialDataSpec::default();
        assert_eq!(spec.rho0(0.5 * (spec.l0 + spec.l3)), 1.0);
        assert_eq!(spec.rho0(0.5 * (spec.l3 + spec.l4)), 0.5);
        assert_eq!(spec.rho0(spec.l4 + 0.1), 0.0);
        assert_eq!(spec.rho0(1.0), 0.0);
        assert_eq!(spec.rho0(spec.l4), 0.0);
        assert_eq!(smooth_step(0.5), 0.5);
    }

    #[test]
    fn rho0_monotone_tail() {
        let spec = InitialDataSpec::default();
        let mut prev = 1.0;
        let n = 2000;
        for k in 0..=n {
            let z = spec.l3 + (spec.l4 - spec.l3) * k as f64 / n as f64;
            let r = spec.rho0(z);
            assert!(r <= prev);
            prev = r;
        }
    }

    #[test]
    fn warmup_density() {
        let spec = InitialDataSpec::warmup((1.0 / 3.0, 2.0 / 3.0), 256);
        assert_eq!(spec.rho0(0.5), 1.0);
        assert_eq!(spec.rho0(1.0 / 3.0), 1.0);
        assert_eq!(spec.rho0(0.1), 0.0);
        assert_eq!(spec.rho0(0.9), 0.0);
        let (lo, hi) = spec.warmup_support();
        assert!(close(lo, 1.0 / 6.0, 1e-15) && close(hi, 5.0 / 6.0, 1e-15));
    }

    #[test]
    fn layout_contains_ladder() {
        let spec = InitialDataSpec::default();
        let labels = spec.marker_labels();
        assert_eq!(labels.len(), spec.n_markers);
        for p in [1.0, spec.l0, spec.l1, spec.l2, spec.l3, spec.l4] {
            assert!(labels.contains(&p), "missing {p}");
        }
        assert!(labels.windows(2).all(|w| w[0] < w[1]));
        // ramps are denser than the plateau
        let gap = |a: f64| {
            let i = labels.iter().position(|&z| z >= a).unwrap();
            labels[i + 1] - labels[i]
        };
        assert!(gap(spec.l3) * 3.0 < gap(spec.l1));
    }

    #[test]
    fn initial_state_invariants() {
        let params = make_params(1.2, 0.9, None).unwrap();
        let state = build_initial_state(&InitialDataSpec::default(), &params).unwrap();
        state.check_invariants().unwrap();
        assert!(state.omega.iter().all(|&w| w == 0.0));
        assert!(state.deform.iter().all(|&d| d == 1.0));
        assert_eq!(state.phi, state.label);

        let warm = InitialDataSpec::warmup((1.0 / 3.0, 2.0 / 3.0), 128);
        let s = build_initial_state(&warm, &make_params(1.0, 1.0, None).unwrap()).unwrap();
        s.check_invariants().unwrap();
        assert!(s.phi.iter().all(|&x| x > 0.0 && x < 1.0));
    }

    #[test]
    fn spec_validation_names_constraint() {
        let params = make_params(1.2, 0.9, None).unwrap();
        let mut spec = InitialDataSpec { l0: 0.5, ..Default::default() };
        let msg = spec.validate(&params).unwrap_err().to_string();
        assert!(msg.contains("1 < L0"), "{msg}");

        spec = InitialDataSpec { l0: 3.0, ..Default::default() };
        assert!(spec.validate(&params).unwrap_err().to_string().contains("L0 <= L1/4"));

        spec = InitialDataSpec { l2: 8.1, ..Default::default() };
        assert!(spec.validate(&params).unwrap_err().to_string().contains("L2 >= L1 + gamma1"));

        spec = InitialDataSpec { n_markers: 10, ..Default::default() };
        assert!(spec.validate(&params).unwrap_err().to_string().contains("n_markers >= 64"));

        let p = make_params(1.0, 1.0, Some(0.6)).unwrap();
        spec = InitialDataSpec { l0: 1.2, l1: 5.0, l2: 6.0, ..Default::default() };
        assert!(spec.validate(&p).unwrap_err().to_string().contains("epsilon < L1/10"));

        let warm = InitialDataSpec::warmup((0.7, 0.4), 128);
        assert!(warm.validate(&params).unwrap_err().to_string().contains("plateau"));
    }

    #[test]
    fn frame_transform_examples() {
        assert_eq!(frame_transform(0.0, Direction::ZToX).unwrap(), 1.0);
        let x = (-14.0f64).exp();
        let z = frame_transform(x, Direction::XToZ).unwrap();
        assert!((z - 14.0).abs() <= 1e-14 * 14.0);
        let back = frame_transform(z, Direction::ZToX).unwrap();
        assert!(((back - x) / x).abs() <= 1e-14);
        assert!(x_to_z(0.0).is_err());
        assert!(x_to_z(1.5).is_err());
        assert!(x_to_z(-1.0).is_err());
        assert!(z_to_x(-0.1).is_err());

        let u_z = velocity_x_to_z(-0.1115718, 0.5);
        assert!(close(u_z, 0.2231436, 1e-7));
        assert!(close(velocity_z_to_x(u_z, 2f64.ln()), -0.1115718, 1e-12));
    }
}
