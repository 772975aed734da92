//! Parameter sweeps over `(beta1, beta2)`.
//!
//! Cells run on a private rayon pool; results are collected in grid order
//! (`beta1` outer, `beta2` inner) so `sweep.csv` does not depend on the
//! worker count. Wall-clock times go to `sweep_timing.csv`, which is not
//! deterministic.

use std::path::Path;
use std::time::Instant;

use bouss1d::diagnostics::{detect_blowup, Classification};
use bouss1d::solver::run_simulation;
use rayon::prelude::*;

use crate::config::SweepConfig;
use crate::error::CliError;
use crate::output::{create_dir, csv_row, num, opt_num, write_text};

pub const SWEEP_HEADER: &str = "beta1,beta2,classification,T_est,min_K,steps";

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub beta1: f64,
    pub beta2: f64,
    pub classification: Classification,
    pub t_est: Option<f64>,
    /// Smallest `min_K` over all frames; NaN if never defined.
    pub min_k: f64,
    pub steps: usize,
    /// Why the cell aborted, if it failed before classification.
    pub error: Option<String>,
    pub seconds: f64,
}

fn run_cell(cfg: &SweepConfig, beta1: f64, beta2: f64) -> CellResult {
    let start = Instant::now();
    let mut cell = CellResult {
        beta1,
        beta2,
        classification: Classification::Aborted,
        t_est: None,
        min_k: f64::NAN,
        steps: 0,
        error: None,
        seconds: 0.0,
    };
    let outcome = cfg
        .cell(beta1, beta2)
        .resolve()
        .and_then(|run| run_simulation(&run.params, &run.spec, &run.ctrl, run.t_end).map_err(CliError::from));
    match outcome {
        Ok(out) => {
            let report = detect_blowup(&out.frames, out.cause);
            let min_k = out.min_k();
            cell.classification = report.classification;
            cell.t_est = report.t_est;
            cell.min_k = if min_k.is_finite() { min_k } else { f64::NAN };
            cell.steps = out.steps;
        }
        Err(e) => cell.error = Some(e.to_string()),
    }
    cell.seconds = start.elapsed().as_secs_f64();
    cell
}

/// Runs every grid cell with `cfg.sweep.workers` threads.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<CellResult>, CliError> {
    let grid: Vec<(f64, f64)> =
        cfg.sweep.beta1.iter().flat_map(|&b1| cfg.sweep.beta2.iter().map(move |&b2| (b1, b2))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.sweep.workers)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {} workers: {e}", cfg.sweep.workers)))?;
    Ok(pool.install(|| grid.par_iter().map(|&(b1, b2)| run_cell(cfg, b1, b2)).collect()))
}

pub fn sweep_csv(cells: &[CellResult]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for c in cells {
        out.push_str(&csv_row(&[
            num(c.beta1),
            num(c.beta2),
            c.classification.as_str().to_string(),
            opt_num(c.t_est),
            num(c.min_k),
            c.steps.to_string(),
        ]));
    }
    out
}

pub fn timing_csv(cells: &[CellResult]) -> String {
    let mut out = String::from("beta1,beta2,runtime_s,error\n");
    for c in cells {
        let error = c.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
        out.push_str(&csv_row(&[num(c.beta1), num(c.beta2), format!("{:.3}", c.seconds), error]));
    }
    out
}

/// Runs the grid and writes `sweep.csv` and `sweep_timing.csv` to `dir`.
pub fn execute_sweep(cfg: &SweepConfig, dir: &Path) -> Result<Vec<CellResult>, CliError> {
    let cells = run_sweep(cfg)?;
    create_dir(dir)?;
    write_text(&dir.join("sweep.csv"), &sweep_csv(&cells))?;
    write_text(&dir.join("sweep_timing.csv"), &timing_csv(&cells))?;
    Ok(cells)
}
