//! Oracle curves as CSV, for plotting and for cross-checking other
//! implementations.

use std::path::Path;

use bouss1d::model::Frame;
use bouss1d::oracles::tau0::{ladder_threshold, LadderReport};
use bouss1d::oracles::{
    gamma_blowup_time, solve_f_picard, solve_gamma, solve_tau0, solve_warmup_g, verify_induction_ladder, Tau0,
};
use serde::Serialize;

use crate::config::ResolvedRun;
use crate::error::CliError;
use crate::output::{create_dir, csv_row, num, write_json, write_text};

const ORACLE_TOL: f64 = 1e-10;
const GAMMA_LABELS: usize = 16;
const F_GRID: usize = 129;
/// `Delta` of the ladder relative to its base-case threshold.
pub const LADDER_MARGIN: f64 = 1.1;

#[derive(Debug, Clone, Serialize)]
pub struct OracleSummary {
    #[serde(rename = "T_G_quadrature")]
    pub t_g_quadrature: f64,
    #[serde(rename = "T_G_ode")]
    pub t_g_ode: f64,
    pub g_energy_defect: f64,
    /// `(label, t*)` of every dumped barrier curve.
    pub gamma_tstar: Vec<(f64, f64)>,
    pub tau0: Option<Tau0>,
    pub f_horizon: Option<f64>,
    pub ladder: Option<LadderReport>,
    pub notes: Vec<String>,
}

/// Writes `oracle_gamma.csv`, `oracle_g.csv`, `oracle_f.csv` (log frame,
/// blow-up range only) and `oracle_summary.json`.
pub fn execute_oracles(run: &ResolvedRun, dir: &Path) -> Result<OracleSummary, CliError> {
    create_dir(dir)?;
    let spec = &run.spec;
    let mut notes = Vec::new();

    let g = solve_warmup_g(ORACLE_TOL)?;
    let mut text = String::from("t,G,dG\n");
    for k in 0..g.curve.grid.len() {
        text.push_str(&csv_row(&[num(g.curve.grid[k]), num(g.curve.values[k]), num(g.curve.slopes[k])]));
    }
    write_text(&dir.join("oracle_g.csv"), &text)?;

    let mut text = String::from("label,t,Gamma,dGamma\n");
    let mut gamma_tstar = Vec::new();
    for k in 0..GAMMA_LABELS {
        let label = 1.0 + (spec.l4 - 1.0) * k as f64 / (GAMMA_LABELS - 1) as f64;
        let curve = solve_gamma(label, ORACLE_TOL)?;
        gamma_tstar.push((label, gamma_blowup_time(label)?));
        for i in 0..curve.grid.len() {
            text.push_str(&csv_row(&[num(label), num(curve.grid[i]), num(curve.values[i]), num(curve.slopes[i])]));
        }
    }
    write_text(&dir.join("oracle_gamma.csv"), &text)?;

    let c = run.params.stretch_constant();
    let tau0 = if spec.frame == Frame::ZModel && run.params.epsilon.is_some() {
        match solve_tau0(&run.params, spec.l0, spec.l1) {
            Ok(t) => Some(t),
            Err(e) => {
                notes.push(format!("tau0 unavailable: {e}"));
                None
            }
        }
    } else {
        None
    };

    let (mut f_horizon, mut ladder) = (None, None);
    match &tau0 {
        Some(t0) if c > 0.0 => {
            let delta = LADDER_MARGIN * ladder_threshold(c, t0.tau0);
            let lo = spec.l2.min(spec.l3 - delta);
            let field = solve_f_picard(c, lo, spec.l3, t0.tau0, F_GRID, ORACLE_TOL)?;
            let mut text = String::from("z,t,f\n");
            for (k, &t) in field.t.iter().enumerate() {
                for (j, &z) in field.z.iter().enumerate() {
                    text.push_str(&csv_row(&[num(z), num(t), num(field.values[k][j])]));
                }
            }
            write_text(&dir.join("oracle_f.csv"), &text)?;
            ladder = Some(verify_induction_ladder(&field, c, t0.tau0, delta)?);
            f_horizon = Some(t0.tau0);
        }
        _ => notes.push("oracle_f.csv skipped: needs the log frame inside the blow-up range".into()),
    }

    let summary = OracleSummary {
        t_g_quadrature: g.quadrature_blowup,
        t_g_ode: g.ode_blowup,
        g_energy_defect: g.max_energy_defect,
        gamma_tstar,
        tau0,
        f_horizon,
        ladder,
        notes,
    };
    write_json(&dir.join("oracle_summary.json"), &summary)?;
    Ok(summary)
}
