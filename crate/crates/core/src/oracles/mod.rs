//! Independent solvers for the auxiliary comparison problems.
//!
//! * [`gamma`]: upper barrier `G_t = e^G G t` for trajectories in the log frame.
//! * [`warmup`]: lower barrier `G'' = G^2/2` for the reciprocal trajectory of
//!   the warm-up model.
//! * [`fpicard`]: lower barrier `f` for the deformation on the plateau.
//! * [`tau0`]: the positivity horizon and the induction ladder.
//!
//! None of these share code with the marker solver.

pub mod fpicard;
pub mod gamma;
pub mod special;
pub mod tau0;
pub mod warmup;

use serde::Serialize;

use crate::interp::hermite;

pub use fpicard::{solve_f_picard, FField};
pub use gamma::{gamma_blowup_time, gamma_closed_form, solve_gamma, solve_gamma_with_outputs};
pub use tau0::{solve_tau0, verify_induction_ladder, LadderReport, Tau0};
pub use warmup::{solve_warmup_g, warmup_blowup_quadrature, WarmupCurve};

/// A scalar trajectory with slopes at every grid point, evaluable between
/// grid points by cubic Hermite interpolation.
#[derive(Debug, Clone, Serialize)]
pub struct OracleCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub slopes: Vec<f64>,
    /// Estimated singular time, beyond the last grid point.
    pub blowup_time: Option<f64>,
    pub method: String,
}

impl OracleCurve {
    pub fn t_max(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    /// Value at `t` in `[grid[0], t_max]`.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        let g = &self.grid;
        if !(t >= g[0]) || t > self.t_max() {
            return None;
        }
        let k = g.partition_point(|&s| s <= t);
        if k == g.len() {
            return Some(*self.values.last().unwrap());
        }
        let k = k - 1;
        Some(hermite(g[k], g[k + 1], self.values[k], self.values[k + 1], self.slopes[k], self.slopes[k + 1], t))
    }

    /// Checks the structural invariants: finite values, strictly increasing
    /// grid, blow-up estimate beyond the grid.
    pub fn is_well_formed(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
            && self.grid.windows(2).all(|w| w[0] < w[1])
            && self.blowup_time.is_none_or(|tb| tb > self.t_max())
    }
}
