//! Lower barrier for the deformation on the plateau:
//!
//! `f_t(z, t) = c int_0^t exp(int_{L2}^{z} f(y, s) dy) ds`, `f(z, 0) = 1/2`
//!
//! for `z` in `[L2, L3]`. Two routes share the trapezoid rule in `z`:
//!
//! * a method-of-lines integration of `f' = g`, `g' = c exp(A)` that follows
//!   the singular front. Because `A(z)` only involves `f` below `z`, the
//!   system is causal in `z`: once the top points blow up the rest keeps
//!   evolving, so the field is tracked until every point has diverged or
//!   the horizon is reached;
//! * Picard iteration from `f_0 = 1/2` on a window where the field is
//!   finite, which cross-checks the first route.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ode::{integrate, OdeOptions, OdeStop};

/// A point counts as singular once `f` exceeds this value or its exponent
/// `int f` exceeds [`EXPONENT_CAP`].
pub const F_BLOWUP: f64 = 1e12;
const EXPONENT_CAP: f64 = 690.0;
/// Fraction of the horizon below which a point's remaining life is ignored.
const REMAINING_TIME: f64 = 1e-9;
/// Uniform time intervals of the output grid; a multiple of 8 so the
/// ladder times `t (1 - 2^-n)`, n <= 3, are grid points.
const TIME_INTERVALS: usize = 512;
const PICARD_MAX_ITER: usize = 500;

#[derive(Debug, Clone, Serialize)]
pub struct PicardReport {
    /// Picard runs on `[0, window_end]`.
    pub window_end: f64,
    pub iterations: usize,
    /// Last `sup |f_n - f_{n-1}|`.
    pub last_update: f64,
    /// Every iterate dominated its predecessor pointwise.
    pub monotone: bool,
    /// `sup |f_picard - f_mol| / |f_mol|` over the window.
    pub max_rel_diff: f64,
}

/// Barrier field on a uniform `(z, t)` grid. Entries are `+inf` at and
/// after the time a point diverged.
#[derive(Debug, Clone, Serialize)]
pub struct FField {
    pub c: f64,
    pub l2: f64,
    pub l3: f64,
    pub z: Vec<f64>,
    pub t: Vec<f64>,
    /// `values[k][j] = f(z[j], t[k])`
    pub values: Vec<Vec<f64>>,
    pub blowup_times: Vec<Option<f64>>,
    /// Divergence time of `f(L3, .)`, if before the horizon.
    pub blowup_time: Option<f64>,
    pub picard: PicardReport,
}

impl FField {
    pub fn t_max(&self) -> f64 {
        *self.t.last().unwrap()
    }

    /// Bilinear interpolation; `+inf` if any surrounding grid value is
    /// infinite, `None` outside the grid.
    pub fn value_at(&self, z: f64, t: f64) -> Option<f64> {
        let (zg, tg) = (&self.z, &self.t);
        if !(z >= zg[0] && z <= *zg.last().unwrap() && t >= 0.0 && t <= self.t_max()) {
            return None;
        }
        let j = zg.partition_point(|&y| y <= z).clamp(1, zg.len() - 1) - 1;
        let k = tg.partition_point(|&s| s <= t).clamp(1, tg.len() - 1) - 1;
        let wz = (z - zg[j]) / (zg[j + 1] - zg[j]);
        let wt = (t - tg[k]) / (tg[k + 1] - tg[k]);
        let v = |kk: usize, jj: usize| self.values[kk][jj];
        let corners = [v(k, j), v(k, j + 1), v(k + 1, j), v(k + 1, j + 1)];
        if corners.iter().any(|c| !c.is_finite()) {
            return Some(f64::INFINITY);
        }
        let lo = corners[0] + wz * (corners[1] - corners[0]);
        let hi = corners[2] + wz * (corners[3] - corners[2]);
        Some(lo + wt * (hi - lo))
    }

    /// Index of the grid time equal to `t`, if any.
    pub fn time_index(&self, t: f64) -> Option<usize> {
        let k = self.t.partition_point(|&s| s < t);
        (k < self.t.len() && (self.t[k] - t).abs() <= 1e-12 * t.abs().max(f64::MIN_POSITIVE)).then_some(k)
    }
}

fn uniform(a: f64, b: f64, intervals: usize) -> Vec<f64> {
    (0..=intervals).map(|i| if i == intervals { b } else { a + (b - a) * i as f64 / intervals as f64 }).collect()
}

/// `A_j = int_{z_0}^{z_j} f` by the trapezoid rule, for `j < upto`.
fn exponents(z: &[f64], f: &[f64], upto: usize, out: &mut [f64]) {
    if upto == 0 {
        return;
    }
    out[0] = 0.0;
    for j in 1..upto {
        out[j] = out[j - 1] + 0.5 * (z[j] - z[j - 1]) * (f[j] + f[j - 1]);
    }
}

/// Fourth-order cumulative integral on a uniform grid (at least 4 points).
fn cumulative_uniform(h: f64, y: &[f64], out: &mut [f64]) {
    let n = y.len();
    debug_assert!(n >= 4);
    out[0] = 0.0;
    let c = h / 24.0;
    out[1] = c * (9.0 * y[0] + 19.0 * y[1] - 5.0 * y[2] + y[3]);
    for k in 1..n - 2 {
        out[k + 1] = out[k] + c * (-y[k - 1] + 13.0 * y[k] + 13.0 * y[k + 1] - y[k + 2]);
    }
    out[n - 1] = out[n - 2] + c * (y[n - 4] - 5.0 * y[n - 3] + 19.0 * y[n - 2] + 9.0 * y[n - 1]);
}

/// One Picard update on a uniform time grid:
/// `f_new = 1/2 + c int_0^t int_0^s exp(int f_prev dz) dr ds`.
/// `prev[k][j]` is the previous iterate at `(t[k], z[j])`.
pub fn picard_step(c: f64, z: &[f64], t: &[f64], prev: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (nz, nt) = (z.len(), t.len());
    let h = t[1] - t[0];
    let mut expo = vec![vec![0.0; nt]; nz];
    let mut a = vec![0.0; nz];
    for (k, row) in prev.iter().enumerate() {
        exponents(z, row, nz, &mut a);
        for j in 0..nz {
            expo[j][k] = a[j].exp();
        }
    }
    let mut next = vec![vec![0.0; nz]; nt];
    let mut p = vec![0.0; nt];
    let mut q = vec![0.0; nt];
    for j in 0..nz {
        cumulative_uniform(h, &expo[j], &mut p);
        cumulative_uniform(h, &p, &mut q);
        for k in 0..nt {
            next[k][j] = 0.5 + c * q[k];
        }
    }
    next
}

fn mol_options(t_max: f64) -> OdeOptions {
    OdeOptions {
        rtol: 1e-12,
        atol: 1e-14,
        h_init: t_max * 1e-8,
        h_min: 1e-300,
        max_steps: 5_000_000,
        record_steps: false,
    }
}

struct MolResult {
    values: Vec<Vec<f64>>,
    blowup_times: Vec<Option<f64>>,
}

/// Whether point `j` has entered its terminal singular regime.
///
/// Near divergence the point's own trapezoid weight `alpha = dz/2`
/// dominates: `f'' ~ C e^{alpha f}`, whose remaining life is `2 / (alpha f')`.
/// Points below are unaffected by `f_j`, so freezing once that remaining
/// time is negligible costs nothing elsewhere.
fn singular(z: &[f64], y: &[f64], nz: usize, a: &[f64], j: usize, t_max: f64) -> bool {
    if y[j] > F_BLOWUP || a[j] > EXPONENT_CAP {
        return true;
    }
    if j == 0 {
        return false;
    }
    let alpha = 0.5 * (z[j] - z[j - 1]);
    let g = y[nz + j];
    alpha * y[j] > 30.0 && g > 0.0 && 2.0 / (alpha * g) < REMAINING_TIME * t_max
}

/// Method-of-lines integration on the output grid `t`, following the
/// singular front downwards in `z`.
fn solve_mol(c: f64, z: &[f64], t: &[f64]) -> Result<MolResult> {
    let nz = z.len();
    let t_max = *t.last().unwrap();
    let mut blowup_times: Vec<Option<f64>> = vec![None; nz];
    let mut values = vec![vec![f64::NAN; nz]; t.len()];
    values[0] = vec![0.5; nz];

    let mut y = vec![0.5; nz];
    y.extend(std::iter::repeat_n(0.0, nz));
    let mut t_cur = 0.0;
    let mut active = nz;
    let mut scratch = vec![0.0; nz];

    while active > 0 && t_cur < t_max {
        let act = active;
        let rhs = |_: f64, y: &[f64], dy: &mut [f64]| {
            let mut a = 0.0;
            for j in 0..nz {
                if j < act {
                    if j > 0 {
                        a += 0.5 * (z[j] - z[j - 1]) * (y[j] + y[j - 1]);
                    }
                    dy[j] = y[nz + j];
                    dy[nz + j] = c * a.exp();
                } else {
                    dy[j] = 0.0;
                    dy[nz + j] = 0.0;
                }
            }
        };
        let stop = |_: f64, y: &[f64]| {
            exponents(z, &y[..nz], act, &mut scratch);
            (0..act).any(|j| singular(z, y, nz, &scratch, j, t_max))
        };
        let outs: Vec<f64> = t.iter().copied().filter(|&s| s > t_cur).collect();
        let sol = integrate(rhs, t_cur, &y, t_max, &outs, mol_options(t_max), stop);

        for (ts, ys) in sol.t.iter().zip(&sol.y) {
            if let Ok(k) = t.binary_search_by(|s| s.total_cmp(ts)) {
                for j in 0..nz {
                    values[k][j] = if j < act { ys[j] } else { f64::INFINITY };
                }
            }
        }
        let (t_end, y_end) = sol.last();
        t_cur = t_end;
        y = y_end.to_vec();
        match sol.stop {
            OdeStop::Finished => break,
            OdeStop::Event | OdeStop::StepUnderflow | OdeStop::NonFinite => {
                let mut a = vec![0.0; nz];
                exponents(z, &y[..nz], act, &mut a);
                let first = (0..act).find(|&j| singular(z, &y, nz, &a, j, t_max)).unwrap_or(act - 1);
                // growth signature: the rate of every diverging point is positive
                if (first..act).any(|j| !(y[nz + j] > 0.0)) {
                    return Err(Error::Oracle(format!("f diverged without growth at t = {t_cur:e}")));
                }
                for bt in &mut blowup_times[first..act] {
                    *bt = Some(t_cur);
                }
                active = first;
            }
            OdeStop::MaxSteps => {
                return Err(Error::Oracle(format!("f integration exhausted its step budget at t = {t_cur:e}")));
            }
        }
    }
    // grid times after a point diverged
    for (k, row) in values.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            if let Some(tb) = blowup_times[j] {
                if t[k] >= tb {
                    *v = f64::INFINITY;
                }
            }
        }
    }
    if values.iter().flatten().any(|v| v.is_nan()) {
        return Err(Error::Oracle("f integration left grid times unresolved".into()));
    }
    Ok(MolResult { values, blowup_times })
}

/// Solves the barrier problem on `[L2, L3] x [0, t_max]` with `n_z` grid
/// points in `z`, and cross-checks it by Picard iteration to `picard_tol`.
pub fn solve_f_picard(c: f64, l2: f64, l3: f64, t_max: f64, n_z: usize, picard_tol: f64) -> Result<FField> {
    if !(c > 0.0) {
        return Err(Error::Domain(format!("c = {c} must be positive")));
    }
    if !(l2 < l3) {
        return Err(Error::Domain(format!("need L2 < L3, got {l2} >= {l3}")));
    }
    if n_z < 16 {
        return Err(Error::Domain(format!("n_z = {n_z} below 16")));
    }
    if !(t_max > 0.0) {
        return Err(Error::Domain(format!("t_max = {t_max} must be positive")));
    }
    let z = uniform(l2, l3, n_z - 1);
    let t = uniform(0.0, t_max, TIME_INTERVALS);
    let mol = solve_mol(c, &z, &t)?;

    // Picard window: the whole horizon, or half of the first divergence time
    let first_blowup = mol.blowup_times.iter().flatten().fold(f64::INFINITY, |a, &b| a.min(b));
    let window_end = t_max.min(0.5 * first_blowup);
    let tw = uniform(0.0, window_end, TIME_INTERVALS);
    let reference = if window_end == t_max { mol.values.clone() } else { solve_mol(c, &z, &tw)?.values };

    let mut iterate = vec![vec![0.5; z.len()]; tw.len()];
    let mut iterations = 0;
    let mut last_update = f64::INFINITY;
    let mut monotone = true;
    while iterations < PICARD_MAX_ITER {
        let next = picard_step(c, &z, &tw, &iterate);
        iterations += 1;
        last_update = 0.0;
        for (rn, ro) in next.iter().zip(&iterate) {
            for (a, b) in rn.iter().zip(ro) {
                last_update = last_update.max((a - b).abs());
                if a < b {
                    monotone = false;
                }
            }
        }
        iterate = next;
        if !last_update.is_finite() {
            return Err(Error::Oracle("Picard iterates diverged inside the finite window".into()));
        }
        if last_update < picard_tol {
            break;
        }
    }
    if !(last_update < picard_tol) {
        return Err(Error::Oracle(format!(
            "Picard iteration did not converge in {PICARD_MAX_ITER} iterations (last update {last_update:e})"
        )));
    }
    let mut max_rel_diff = 0.0f64;
    for (rp, rm) in iterate.iter().zip(&reference) {
        for (p, m) in rp.iter().zip(rm) {
            max_rel_diff = max_rel_diff.max((p - m).abs() / m.abs());
        }
    }

    let blowup_time = *mol.blowup_times.last().unwrap();
    Ok(FField {
        c,
        l2,
        l3,
        z,
        t,
        values: mol.values,
        blowup_times: mol.blowup_times,
        blowup_time,
        picard: PicardReport { window_end, iterations, last_update, monotone, max_rel_diff },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_iterate_closed_form() {
        let (c, l2, l3) = (0.7, 9.0, 12.0);
        let z = uniform(l2, l3, 40);
        let t = uniform(0.0, 0.5, 64);
        let seed = vec![vec![0.5; z.len()]; t.len()];
        let f1 = picard_step(c, &z, &t, &seed);
        for (k, &tk) in t.iter().enumerate() {
            for (j, &zj) in z.iter().enumerate() {
                let exact = 0.5 + c * tk * tk / 2.0 * ((zj - l2) / 2.0).exp();
                assert!((f1[k][j] - exact).abs() <= 1e-12 * exact, "{} vs {exact}", f1[k][j]);
            }
        }
    }

    #[test]
    fn initial_value_and_monotonicity() {
        let f = solve_f_picard(1.0 / 3.0, 9.0, 12.0, 0.5, 33, 1e-12).unwrap();
        assert!(f.values[0].iter().all(|&v| v == 0.5));
        assert!(f.picard.monotone);
        assert!(f.blowup_time.is_none());
        // nondecreasing in t and in z
        for k in 1..f.t.len() {
            for j in 0..f.z.len() {
                assert!(f.values[k][j] >= f.values[k - 1][j]);
                if j > 0 {
                    assert!(f.values[k][j] >= f.values[k][j - 1]);
                }
            }
        }
        assert!(f.picard.max_rel_diff < 1e-6, "{}", f.picard.max_rel_diff);
    }

    #[test]
    fn divergence_is_detected_and_front_moves_down() {
        let f = solve_f_picard(1.0, 0.0, 20.0, 2.0, 41, 1e-10).unwrap();
        let tb = f.blowup_time.expect("f(L3) diverges before t_max");
        assert!(tb < 2.0);
        // lower points diverge later or not at all
        let times: Vec<f64> = f.blowup_times.iter().map(|b| b.unwrap_or(f64::INFINITY)).collect();
        assert!(times.windows(2).all(|w| w[0] >= w[1]));
        assert!(f.picard.window_end <= 0.5 * tb);
        assert!(f.picard.max_rel_diff < 1e-6, "{}", f.picard.max_rel_diff);
    }

    #[test]
    fn input_validation() {
        assert!(solve_f_picard(0.0, 9.0, 12.0, 1.0, 32, 1e-10).is_err());
        assert!(solve_f_picard(1.0, 12.0, 9.0, 1.0, 32, 1e-10).is_err());
        assert!(solve_f_picard(1.0, 9.0, 12.0, 1.0, 8, 1e-10).is_err());
    }
}
