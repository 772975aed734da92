//! Adaptive Dormand–Prince 5(4) integrator for the small auxiliary systems
//! solved by the oracles. Kept separate from the marker solver so the
//! oracles do not share its time-stepping path.

/// Tolerances and limits of [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub max_steps: usize,
    /// Record every accepted step; otherwise only the start, the `t_out`
    /// landings and the final point.
    pub record_steps: bool,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-10, atol: 1e-12, h_init: 1e-4, h_min: 1e-300, max_steps: 1_000_000, record_steps: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OdeStop {
    /// Reached the final time.
    Finished,
    /// The stop predicate fired.
    Event,
    StepUnderflow,
    MaxSteps,
    /// The right-hand side or the state became non-finite.
    NonFinite,
}

/// Accepted points of an integration. `dy[k]` is the derivative at `t[k]`.
#[derive(Debug, Clone)]
pub struct OdeSolution {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub dy: Vec<Vec<f64>>,
    pub stop: OdeStop,
}

impl OdeSolution {
    pub fn last(&self) -> (f64, &[f64]) {
        (*self.t.last().unwrap(), self.y.last().unwrap())
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// 5th minus 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn push_last(sol: &mut OdeSolution, t: f64, y: &[f64], dy: &[f64]) {
    if *sol.t.last().unwrap() != t {
        sol.t.push(t);
        sol.y.push(y.to_vec());
        sol.dy.push(dy.to_vec());
    }
}

/// Integrates `y' = f(t, y)` from `t0` to `t_end`, landing exactly on every
/// time in `t_out` (sorted, inside the interval). Stops early when
/// `stop(t, y)` returns true after an accepted step.
pub fn integrate<F, S>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    t_out: &[f64],
    opts: OdeOptions,
    mut stop: S,
) -> OdeSolution
where
    F: FnMut(f64, &[f64], &mut [f64]),
    S: FnMut(f64, &[f64]) -> bool,
{
    let n = y0.len();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; n];
    f(t, &y, &mut k1);
    let mut sol = OdeSolution { t: vec![t], y: vec![y.clone()], dy: vec![k1.clone()], stop: OdeStop::Finished };
    if k1.iter().any(|v| !v.is_finite()) {
        sol.stop = OdeStop::NonFinite;
        return sol;
    }
    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut h = opts.h_init.min(t_end - t0);
    let mut next_out = t_out.iter().position(|&s| s > t0).unwrap_or(t_out.len());
    let mut steps = 0usize;

    while t < t_end {
        if steps >= opts.max_steps || h < opts.h_min {
            sol.stop = if steps >= opts.max_steps { OdeStop::MaxSteps } else { OdeStop::StepUnderflow };
            push_last(&mut sol, t, &y, &k1);
            return sol;
        }
        let target = if next_out < t_out.len() { t_out[next_out].min(t_end) } else { t_end };
        let mut landing = false;
        let mut step = h;
        if t + step >= target {
            step = target - t;
            landing = true;
        }

        macro_rules! stage {
            ($dst:expr, $c:expr, [$(($a:expr, $k:expr)),*]) => {{
                for i in 0..n {
                    tmp[i] = y[i] + step * (0.0 $(+ $a * $k[i])*);
                }
                f(t + $c * step, &tmp, &mut $dst);
            }};
        }
        stage!(k2, C2, [(A21, k1)]);
        stage!(k3, C3, [(A31, k1), (A32, k2)]);
        stage!(k4, C4, [(A41, k1), (A42, k2), (A43, k3)]);
        stage!(k5, C5, [(A51, k1), (A52, k2), (A53, k3), (A54, k4)]);
        stage!(k6, 1.0, [(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)]);
        for i in 0..n {
            y_new[i] = y[i] + step * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
        }
        f(t + step, &y_new, &mut k7);

        let mut err = 0.0f64;
        let mut finite = true;
        for i in 0..n {
            let e = step * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            let r = (e / sc).abs();
            if !r.is_finite() || !y_new[i].is_finite() || !k7[i].is_finite() {
                finite = false;
            }
            err = err.max(r);
        }
        if !finite {
            h = 0.25 * step;
            if h < opts.h_min {
                sol.stop = OdeStop::NonFinite;
                push_last(&mut sol, t, &y, &k1);
                return sol;
            }
            continue;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        if err <= 1.0 {
            steps += 1;
            t = if landing { target } else { t + step };
            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut k1, &mut k7);
            let landed = landing && next_out < t_out.len() && target == t_out[next_out];
            if landed {
                next_out += 1;
            }
            let halt = stop(t, &y);
            if opts.record_steps || landed || halt || t >= t_end {
                sol.t.push(t);
                sol.y.push(y.clone());
                sol.dy.push(k1.clone());
            }
            if halt {
                sol.stop = OdeStop::Event;
                return sol;
            }
            // keep the pre-landing step size when a landing shortened the step
            h = if landing { h.max(step * factor) } else { step * factor };
        } else {
            h = step * factor.min(1.0);
        }
    }
    sol
}
