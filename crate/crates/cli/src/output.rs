//! Deterministic file emission.
//!
//! Floats are written in the shortest decimal form that parses back to the
//! same bits (`NaN` and `inf` for non-finite values), and every file is
//! assembled in memory before a single write.

use std::fmt::Write as _;
use std::path::Path;

use bouss1d::diagnostics::DiagnosticsFrame;
use serde::Serialize;

use crate::error::CliError;

pub const FRAMES_HEADER: &str =
    "t,delta_x,psi,sup_omega,sup_dzrho,sup_dxu,min_K,max_K,min_D,I_omega,I_drho,I_dxu,dt,quality";
pub const PROFILE_HEADER: &str = "z,rho0,phi_final,omega_final,D_final";

/// Shortest round-trip decimal.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

/// Empty for a missing value.
pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn csv_row(fields: &[String]) -> String {
    let mut line = fields.join(",");
    line.push('\n');
    line
}

pub fn frames_csv(frames: &[DiagnosticsFrame]) -> String {
    let mut out = String::with_capacity(160 * (frames.len() + 1));
    out.push_str(FRAMES_HEADER);
    out.push('\n');
    for f in frames {
        let values = [
            f.t,
            f.delta_x,
            f.psi,
            f.sup_omega,
            f.sup_dzrho,
            f.sup_dxu,
            f.min_k,
            f.max_k,
            f.min_d,
            f.i_omega,
            f.i_drho,
            f.i_dxu,
            f.dt,
        ];
        for v in values {
            out.push_str(&num(v));
            out.push(',');
        }
        let _ = writeln!(out, "{}", f.quality);
    }
    out
}

pub fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::io(path, std::io::Error::new(std::io::ErrorKind::InvalidData, e)))?;
    text.push('\n');
    write_text(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 6.02e23, -0.0, 5e-324] {
            assert_eq!(num(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
        assert_eq!(num(f64::NAN), "NaN");
        assert_eq!(num(f64::INFINITY), "inf");
        assert_eq!(opt_num(None), "");
    }

    #[test]
    fn frame_rows_match_header() {
        let frame = DiagnosticsFrame {
            t: 0.5,
            delta_x: 0.25,
            psi: 1.0,
            sup_omega: 2.0,
            sup_dzrho: 0.0,
            sup_dxrho: 0.0,
            sup_dxu: 0.0,
            min_k: f64::NAN,
            max_k: f64::NAN,
            min_d: 1.0,
            i_omega: 0.0,
            i_drho: 0.0,
            i_dxu: 0.0,
            dt: 1e-3,
            quality: 1,
            n_markers: 4,
        };
        let text = frames_csv(&[frame]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0].split(',').count(), lines[1].split(',').count());
        assert!(lines[1].starts_with("0.5,0.25,1.0,2.0,"));
        assert!(lines[1].ends_with(",0.001,1"));
    }
}
