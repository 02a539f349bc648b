//! CSV and report writers.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use seqir_core::integrator::Trajectory;

use crate::error::CliError;

/// Significant digits written for every number.
pub const SIGNIFICANT_DIGITS: i32 = 15;

pub const CSV_HEADER: &str = "t,regime,S,E,Q,I,R";

/// Plain decimal notation with [`SIGNIFICANT_DIGITS`] significant digits.
pub fn format_decimal(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    // rounding to the target precision can bump the exponent, so format in
    // scientific notation first and read the exponent from there
    let sci = format!("{:.*e}", (SIGNIFICANT_DIGITS - 1) as usize, x);
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    let decimals = (SIGNIFICANT_DIGITS - 1 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Regimes are written 1-based.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::with_capacity(traj.len() * 120);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for s in &traj.samples {
        write!(out, "{},{}", format_decimal(s.t), s.regime + 1).unwrap();
        for v in s.state.to_array() {
            out.push(',');
            out.push_str(&format_decimal(v));
        }
        out.push('\n');
    }
    out
}

pub fn ensure_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
        }
        _ => Ok(()),
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    ensure_parent(path)?;
    let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(contents.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(path, e))
}

pub fn to_toml<T: serde::Serialize>(value: &T) -> String {
    toml::to_string(value).expect("report serializes to TOML")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_formatting() {
        assert_eq!(format_decimal(0.0), "0");
        assert_eq!(format_decimal(20.0), "20.0000000000000");
        assert_eq!(format_decimal(0.1), "0.100000000000000");
        assert_eq!(format_decimal(1234.5), "1234.50000000000");
        assert_eq!(format_decimal(9.9999999999999999), "10.0000000000000");
        assert_eq!(format_decimal(1e-3), "0.00100000000000000");
        assert_eq!(format_decimal(1e20), "100000000000000000000");
    }

    #[test]
    fn decimal_round_trips_to_fifteen_digits() {
        for x in [std::f64::consts::PI, 1.0 / 3.0, 12345.678901234567, 7.3e-9, 0.999999999999999] {
            let back: f64 = format_decimal(x).parse().unwrap();
            assert!(((back - x) / x).abs() < 1e-14, "{x}");
            assert!(!format_decimal(x).contains('e'));
        }
    }
}
