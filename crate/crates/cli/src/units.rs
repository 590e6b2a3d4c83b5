//! Quantities with mandatory unit suffixes.

use std::f64::consts::PI;

/// Length in metres, parsed from e.g. `351nm`, `0.1 mm`, `1e-3m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Length(pub f64);

/// Angle in radians, parsed from e.g. `45deg`, `0.5rad`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Angle(pub f64);

const LENGTH_UNITS: [(&str, f64); 5] = [("nm", 1e-9), ("um", 1e-6), ("µm", 1e-6), ("mm", 1e-3), ("m", 1.0)];
const ANGLE_UNITS: [(&str, f64); 2] = [("deg", PI / 180.0), ("rad", 1.0)];

fn parse_with(s: &str, units: &[(&str, f64)], what: &str) -> Result<f64, String> {
    let s = s.trim();
    let (number, scale) = units
        .iter()
        .find_map(|(suffix, scale)| s.strip_suffix(suffix).map(|n| (n.trim(), *scale)))
        .ok_or_else(|| {
            let names: Vec<&str> = units.iter().map(|(u, _)| *u).collect();
            format!("{what} `{s}` needs a unit suffix ({})", names.join(", "))
        })?;
    let value: f64 = number.parse().map_err(|_| format!("cannot parse `{number}` as a number"))?;
    if !value.is_finite() {
        return Err(format!("{what} `{s}` is not finite"));
    }
    Ok(value * scale)
}

pub fn parse_length(s: &str) -> Result<Length, String> {
    parse_with(s, &LENGTH_UNITS, "length").map(Length)
}

pub fn parse_angle(s: &str) -> Result<Angle, String> {
    parse_with(s, &ANGLE_UNITS, "angle").map(Angle)
}
