//! Upper barrier for log-frame trajectories: `G_t = e^G G t`, `G(z, 0) = z`.
//!
//! The equation separates, `t^2 / 2 = E1(z) - E1(G)`, which gives both a
//! closed-form value and the singular time `t* = sqrt(2 E1(z))`.

use super::special::{e1, e1_scaled, ln_e1};
use super::OracleCurve;
use crate::error::{Error, Result};
use crate::ode::{integrate, OdeOptions};

/// Singular time `sqrt(2 E1(z))` of the barrier started at `z > 0`.
pub fn gamma_blowup_time(z: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::Domain(format!("barrier label z = {z} must be positive")));
    }
    Ok((2.0 * e1(z)).sqrt())
}

/// Closed-form barrier value, `None` at or beyond the singular time.
pub fn gamma_closed_form(z: f64, t: f64) -> Result<Option<f64>> {
    if !(z > 0.0) {
        return Err(Error::Domain(format!("barrier label z = {z} must be positive")));
    }
    if t == 0.0 {
        return Ok(Some(z));
    }
    let e1z = e1(z);
    let target = e1z - 0.5 * t * t;
    if !(target > 0.0) {
        return Ok(None);
    }
    // E1 is decreasing: solve ln E1(G) = ln target for G >= z
    let ln_target = target.ln();
    let phi = |g: f64| ln_e1(g) - ln_target;
    let mut lo = z;
    let mut hi = z + 1.0;
    while phi(hi) > 0.0 {
        lo = hi;
        hi = z + 2.0 * (hi - z);
        if hi > 1e6 {
            return Ok(None);
        }
    }
    let mut g = lo;
    for _ in 0..200 {
        // Newton on ln E1, derivative -1 / (g e^g E1(g)); bisection fallback
        let f = phi(g);
        if f > 0.0 {
            lo = g;
        } else {
            hi = g;
        }
        let slope = -1.0 / (g * e1_scaled(g));
        let mut next = g - f / slope;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - g).abs() <= 1e-15 * g {
            g = next;
            break;
        }
        g = next;
    }
    Ok(Some(g))
}

/// Integrates the barrier ODE up to `0.99 t*`, tolerance `tol`.
pub fn solve_gamma(z: f64, tol: f64) -> Result<OracleCurve> {
    solve_gamma_with_outputs(z, tol, &[])
}

/// As [`solve_gamma`], with grid points forced at every time in `t_out`.
pub fn solve_gamma_with_outputs(z: f64, tol: f64, t_out: &[f64]) -> Result<OracleCurve> {
    let t_star = gamma_blowup_time(z)?;
    let t_end = 0.99 * t_star;
    let opts = OdeOptions {
        rtol: tol,
        atol: tol * 1e-3,
        h_init: t_star * 1e-4,
        h_min: t_star * 1e-16,
        max_steps: 1_000_000,
        record_steps: true,
    };
    let sol = integrate(|t, y, dy| dy[0] = y[0].exp() * y[0] * t, 0.0, &[z], t_end, t_out, opts, |_, y| y[0] > 700.0);
    let values: Vec<f64> = sol.y.iter().map(|y| y[0]).collect();
    let slopes: Vec<f64> = sol.dy.iter().map(|d| d[0]).collect();
    Ok(OracleCurve {
        grid: sol.t,
        values,
        slopes,
        blowup_time: Some(t_star),
        method: "dopri5; t* = sqrt(2 E1(z))".into(),
    })
}
