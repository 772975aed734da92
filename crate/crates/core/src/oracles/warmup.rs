//! Lower barrier for the warm-up model.
//!
//! With `y(t) = 1 / Phi(1/3, t)` the warm-up dynamics give `y'' >= y^2 / 2`,
//! `y(0) = 3`, `y'(0) = 0`, so `y >= G` where `G'' = G^2 / 2`, `G(0) = 1`,
//! `G'(0) = 0`. The first integral is `v^2 = (G^3 - 1) / 3` with `v = G'`,
//! and the singular time is `T_G = sqrt(3) int_1^inf (G^3 - 1)^{-1/2} dG`.

use serde::Serialize;

use super::special::adaptive_simpson;
use super::OracleCurve;
use crate::error::{Error, Result};
use crate::ode::{integrate, OdeOptions, OdeStop};

/// `G` stops being integrated once it exceeds this value.
const G_STOP: f64 = 1e8;

#[derive(Debug, Clone, Serialize)]
pub struct WarmupCurve {
    /// `values` hold `G`, `slopes` hold `v = G'`.
    pub curve: OracleCurve,
    /// `T_G` by quadrature.
    pub quadrature_blowup: f64,
    /// Singular time from the ODE: last grid time plus the asymptotic tail
    /// `2 sqrt(3) / sqrt(G)`.
    pub ode_blowup: f64,
    /// `max |v^2 - (G^3 - 1)/3| / (1 + G^3)` over the grid.
    pub max_energy_defect: f64,
}

impl WarmupCurve {
    /// `G(t)` for `t` up to the last grid time.
    pub fn g_at(&self, t: f64) -> Option<f64> {
        self.curve.value_at(t)
    }
}

/// `T_G` with the substitution `G = 1 + s^2` on `s` in [0, 1] and
/// `s = 1/w` beyond, which leaves two smooth integrands on [0, 1].
pub fn warmup_blowup_quadrature(tol: f64) -> f64 {
    let near = adaptive_simpson(&|s: f64| 2.0 / (3.0 + 3.0 * s * s + s.powi(4)).sqrt(), 0.0, 1.0, tol);
    let far = adaptive_simpson(&|w: f64| 2.0 / (1.0 + 3.0 * w * w + 3.0 * w.powi(4)).sqrt(), 0.0, 1.0, tol);
    3f64.sqrt() * (near + far)
}

pub fn solve_warmup_g(tol: f64) -> Result<WarmupCurve> {
    let t_quad = warmup_blowup_quadrature(tol * 1e-3);
    let opts = OdeOptions {
        rtol: tol * 1e-2,
        atol: tol * 1e-2,
        h_init: 1e-3,
        h_min: 1e-14,
        max_steps: 2_000_000,
        record_steps: true,
    };
    let sol = integrate(
        |_, y, dy| {
            dy[0] = y[1];
            dy[1] = 0.5 * y[0] * y[0];
        },
        0.0,
        &[1.0, 0.0],
        2.0 * t_quad,
        &[],
        opts,
        |_, y| y[0] > G_STOP,
    );
    if sol.stop != OdeStop::Event {
        return Err(Error::Oracle(format!("G did not reach {G_STOP:e}: {:?}", sol.stop)));
    }
    let grid = sol.t;
    let values: Vec<f64> = sol.y.iter().map(|y| y[0]).collect();
    let slopes: Vec<f64> = sol.y.iter().map(|y| y[1]).collect();
    let max_energy_defect = values
        .iter()
        .zip(&slopes)
        .map(|(&g, &v)| (v * v - (g * g * g - 1.0) / 3.0).abs() / (1.0 + g * g * g))
        .fold(0.0, f64::max);
    let (t_last, g_last) = (*grid.last().unwrap(), *values.last().unwrap());
    let ode_blowup = t_last + 2.0 * 3f64.sqrt() / g_last.sqrt();
    Ok(WarmupCurve {
        curve: OracleCurve {
            grid,
            values,
            slopes,
            blowup_time: Some(ode_blowup),
            method: "dopri5 on (G, v); tail 2 sqrt(3/G)".into(),
        },
        quadrature_blowup: t_quad,
        ode_blowup,
        max_energy_defect,
    })
}
