//! The positivity horizon `tau0` and the induction ladder for `f`.
//!
//! `tau0` is the root of `g(tau) = tau e^{Gamma(3 L1, tau)} - eps / (tau (gamma1 + gamma2 + eps))`,
//! pulled back if needed so that `Gamma(L0, tau0) < L0 + L1/6` and
//! `Gamma(L1, tau0) < 3 L1 / 2`.

use serde::Serialize;

use super::fpicard::FField;
use super::gamma::{gamma_blowup_time, gamma_closed_form};
use crate::error::{Error, Result};
use crate::model::ModelParams;

#[derive(Debug, Clone, Serialize)]
pub struct Tau0 {
    pub tau0: f64,
    /// Unclamped root of `g`.
    pub root: f64,
    /// `|g(root)| / rhs(root)`.
    pub residual: f64,
    /// `eps / (root (gamma1 + gamma2 + eps))`.
    pub rhs: f64,
    /// The caps pulled the horizon below the root.
    pub capped: bool,
}

fn gamma_or_inf(z: f64, t: f64) -> Result<f64> {
    Ok(gamma_closed_form(z, t)?.unwrap_or(f64::INFINITY))
}

pub fn solve_tau0(params: &ModelParams, l0: f64, l1: f64) -> Result<Tau0> {
    let eps = params.epsilon.ok_or_else(|| {
        Error::Domain(format!(
            "tau0 needs an epsilon; (beta1, beta2) = ({}, {}) is outside the blow-up range",
            params.beta1, params.beta2
        ))
    })?;
    if !(l1 > 0.0 && l0 > 0.0) {
        return Err(Error::Domain(format!("need positive L0, L1, got {l0}, {l1}")));
    }
    let sum = params.gamma1 + params.gamma2 + eps;
    let rhs = |tau: f64| eps / (tau * sum);
    let z = 3.0 * l1;
    let g = |tau: f64| -> Result<f64> { Ok(tau * gamma_or_inf(z, tau)?.exp() - rhs(tau)) };

    let mut hi = 0.99 * gamma_blowup_time(z)?;
    // small-tau asymptotics: tau^2 e^z ~ eps / sum
    let seed = (eps * (-z).exp() / sum).sqrt();
    let mut lo = if seed < hi && g(seed)? < 0.0 { seed } else { hi * 1e-12 };
    if !(g(lo)? < 0.0 && g(hi)? > 0.0) {
        return Err(Error::Oracle(format!("tau0: no sign change of g on [{lo:e}, {hi:e}]")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (glo, ghi) = (g(lo)?, g(hi)?);
    let root = if glo.abs() <= ghi.abs() { lo } else { hi };
    let residual = glo.abs().min(ghi.abs()) / rhs(root);

    let mut tau0 = root;
    let mut capped = false;
    while gamma_or_inf(l0, tau0)? >= l0 + l1 / 6.0 || gamma_or_inf(l1, tau0)? >= 1.5 * l1 {
        tau0 *= 0.9;
        capped = true;
    }
    Ok(Tau0 { tau0, root, residual, rhs: rhs(root), capped })
}

/// Ladder heights `G_n = (n + 1) 2^{n + 2}`.
pub fn ladder_height(n: u32) -> f64 {
    f64::from(n + 1) * 2f64.powi(n as i32 + 2)
}

/// Smallest `Delta` meeting the base case `c e^{Delta/4} tau0^2 / 8 >= 16`
/// together with `Delta > 8`.
pub fn ladder_threshold(c: f64, tau0: f64) -> f64 {
    (4.0 * (128.0 / (c * tau0 * tau0)).ln()).max(8.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct LadderLevel {
    pub n: u32,
    pub t: f64,
    pub z_lo: f64,
    pub height: f64,
    /// Smallest `f` over the level's grid points; `inf` if all diverged.
    pub min_f: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LadderReport {
    pub delta: f64,
    pub base_value: f64,
    pub levels: Vec<LadderLevel>,
    pub pass: bool,
    /// First violated condition, by name.
    pub failure: Option<String>,
}

/// Checks the base case and `f(z, tau0 (1 - 2^-n)) >= G_n` on
/// `[L3 - Delta 2^-n, L3]` for `n = 1, 2, 3`.
pub fn verify_induction_ladder(f: &FField, c: f64, tau0: f64, delta: f64) -> Result<LadderReport> {
    if (f.c - c).abs() > 1e-12 * c {
        return Err(Error::Domain(format!("f was solved with c = {}, ladder asks for {c}", f.c)));
    }
    if f.l2 > f.l3 - delta + 1e-9 * delta {
        return Err(Error::Domain(format!("f covers [{}, {}], ladder needs [L3 - {delta}, L3]", f.l2, f.l3)));
    }
    if f.t_max() < tau0 * (1.0 - 1e-12) {
        return Err(Error::Domain(format!("f solved to t = {:e} < tau0 = {tau0:e}", f.t_max())));
    }

    let base_value = c * (delta / 4.0).exp() * tau0 * tau0 / 8.0;
    let mut failure = None;
    if !(delta > 8.0) {
        failure = Some(format!("base case Delta > 8 violated (Delta = {delta})"));
    } else if !(base_value >= ladder_height(1)) {
        failure = Some(format!("base case c e^(Delta/4) tau0^2 / 8 >= 16 violated (value {base_value:e})"));
    }

    let mut levels = Vec::new();
    for n in 1..=3u32 {
        let scale = 2f64.powi(-(n as i32));
        let t = tau0 * (1.0 - scale);
        let z_lo = f.l3 - delta * scale;
        let height = ladder_height(n);
        let mut min_f = f64::INFINITY;
        for &z in f.z.iter().filter(|&&z| z >= z_lo - 1e-12 * delta) {
            let v = f.value_at(z, t).ok_or_else(|| Error::Internal(format!("f not defined at ({z}, {t:e})")))?;
            min_f = min_f.min(v);
        }
        let pass = min_f >= height;
        if !pass && failure.is_none() {
            failure = Some(format!("level n = {n}: min f = {min_f:e} < G_{n} = {height}"));
        }
        levels.push(LadderLevel { n, t, z_lo, height, min_f, pass });
    }
    Ok(LadderReport { delta, base_value, pass: failure.is_none(), levels, failure })
}
