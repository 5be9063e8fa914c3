//! Quantities with explicit unit suffixes, as used in scenario files.
//!
//! Everything is stored in SI base units. Decimal prefixes (`MHz`, `Mbit`,
//! ...) are applied by shifting the decimal exponent of the written number
//! before a single correctly-rounded parse, so `"55.2 Mbit"` and
//! `"55200000 bit"` load to the same `f64`. Formatting does the reverse shift
//! on the shortest round-trip representation, which makes
//! `parse(format(v)) == v` hold exactly for every finite `v`.

use crate::{Error, Result};

/// Physical dimension of a scenario quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Time,
    Length,
    Frequency,
    Speed,
    /// Absolute power; accepts `dBm`.
    Power,
    /// Power spectral density; accepts `dBm/Hz`.
    PowerDensity,
    Data,
    DataRate,
    CycleRate,
    Intensity,
    Decibel,
    PerFrequency,
    PerDataRate,
    PerCycleRate,
    PerData,
}

// (suffix, decimal exponent of the SI conversion factor)
const TIME: &[(&str, i32)] = &[("s", 0), ("ms", -3)];
const LENGTH: &[(&str, i32)] = &[("m", 0), ("km", 3)];
const FREQUENCY: &[(&str, i32)] = &[("MHz", 6), ("Hz", 0), ("kHz", 3), ("GHz", 9)];
const SPEED: &[(&str, i32)] = &[("m/s", 0)];
const POWER: &[(&str, i32)] = &[("W", 0), ("mW", -3)];
const POWER_DENSITY: &[(&str, i32)] = &[("W/Hz", 0), ("mW/Hz", -3)];
const DATA: &[(&str, i32)] = &[("Mbit", 6), ("bit", 0), ("kbit", 3), ("Gbit", 9)];
const DATA_RATE: &[(&str, i32)] = &[("Mbit/s", 6), ("bit/s", 0), ("kbit/s", 3), ("Gbit/s", 9)];
const CYCLE_RATE: &[(&str, i32)] = &[("Mcycle/s", 6), ("cycle/s", 0), ("Gcycle/s", 9)];
const INTENSITY: &[(&str, i32)] = &[("cycle/bit", 0)];
const DECIBEL: &[(&str, i32)] = &[("dB", 0)];

impl Dimension {
    fn table(self) -> &'static [(&'static str, i32)] {
        match self {
            Dimension::Time => TIME,
            Dimension::Length => LENGTH,
            Dimension::Frequency | Dimension::PerFrequency => FREQUENCY,
            Dimension::Speed => SPEED,
            Dimension::Power => POWER,
            Dimension::PowerDensity => POWER_DENSITY,
            Dimension::Data | Dimension::PerData => DATA,
            Dimension::DataRate | Dimension::PerDataRate => DATA_RATE,
            Dimension::CycleRate | Dimension::PerCycleRate => CYCLE_RATE,
            Dimension::Intensity => INTENSITY,
            Dimension::Decibel => DECIBEL,
        }
    }

    fn is_inverse(self) -> bool {
        matches!(
            self,
            Dimension::PerFrequency
                | Dimension::PerDataRate
                | Dimension::PerCycleRate
                | Dimension::PerData
        )
    }

    fn log_suffix(self) -> Option<&'static str> {
        match self {
            Dimension::Power => Some("dBm"),
            Dimension::PowerDensity => Some("dBm/Hz"),
            _ => None,
        }
    }
}

/// Parses `"<number> <unit>"` into SI base units.
pub fn parse_quantity(text: &str, dim: Dimension) -> Result<f64> {
    let text = text.trim();
    let (num, unit) = text
        .split_once(char::is_whitespace)
        .map(|(n, u)| (n, u.trim()))
        .ok_or_else(|| Error::Format(format!("`{text}`: expected `<number> <unit>`")))?;

    if let Some(log) = dim.log_suffix() {
        if unit == log {
            let dbm = parse_shifted(num, 0)?;
            return Ok(dbm_to_watts(dbm));
        }
    }

    let unit = if dim.is_inverse() {
        unit.strip_prefix("per ")
            .ok_or_else(|| Error::Format(format!("`{text}`: expected `per <unit>`")))?
            .trim()
    } else {
        unit
    };
    let exp = dim
        .table()
        .iter()
        .find(|(s, _)| *s == unit)
        .map(|&(_, e)| e)
        .ok_or_else(|| Error::Format(format!("`{text}`: unknown unit for {dim:?}")))?;
    parse_shifted(num, if dim.is_inverse() { -exp } else { exp })
}

/// Formats an SI value in the canonical unit of `dim`.
pub fn format_quantity(value: f64, dim: Dimension) -> String {
    if let Some(log) = dim.log_suffix() {
        if let Some(dbm) = exact_dbm(value) {
            return format!("{dbm} {log}");
        }
    }
    let (unit, exp) = dim.table()[0];
    if dim.is_inverse() {
        format!("{} per {unit}", format_shifted(value, exp))
    } else {
        format!("{} {unit}", format_shifted(value, -exp))
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// Shortest fixed-point dBm string that converts back to exactly `watts`.
fn exact_dbm(watts: f64) -> Option<String> {
    if !(watts > 0.0) || !watts.is_finite() {
        return None;
    }
    let dbm = watts_to_dbm(watts);
    (0..=15)
        .map(|p| format!("{dbm:.p$}"))
        .chain(std::iter::once(format!("{dbm}")))
        .find(|s| s.parse::<f64>().map(dbm_to_watts) == Ok(watts))
}

/// Parses a decimal literal and multiplies it by `10^shift` with one rounding.
pub fn parse_shifted(num: &str, shift: i32) -> Result<f64> {
    let bad = || Error::Format(format!("`{num}` is not a decimal number"));
    let (mantissa, exp) = match num.find(['e', 'E']) {
        Some(i) => (&num[..i], num[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (num, 0),
    };
    let body = mantissa.strip_prefix(['-', '+']).unwrap_or(mantissa);
    let digits = body.chars().filter(char::is_ascii_digit).count();
    let dots = body.chars().filter(|&c| c == '.').count();
    if digits == 0 || dots > 1 || digits + dots != body.len() {
        return Err(bad());
    }
    let value: f64 = format!("{mantissa}e{}", exp + shift)
        .parse()
        .map_err(|_| bad())?;
    if value.is_finite() {
        Ok(value)
    } else {
        Err(bad())
    }
}

/// Writes `value * 10^shift` exactly, by moving the decimal point of the
/// shortest round-trip representation of `value`.
pub fn format_shifted(value: f64, shift: i32) -> String {
    if value == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{:e}", value.abs());
    let (mant, exp) = sci.split_once('e').expect("`{:e}` always has an exponent");
    let digits: String = mant.chars().filter(char::is_ascii_digit).collect();
    let exp = exp.parse::<i32>().expect("integer exponent") + shift;
    let sign = if value < 0.0 { "-" } else { "" };

    let n = digits.len() as i32;
    let body = if (-7..21).contains(&exp) {
        if exp >= 0 {
            if exp + 1 >= n {
                format!("{digits}{}", "0".repeat((exp + 1 - n) as usize))
            } else {
                let (int, frac) = digits.split_at((exp + 1) as usize);
                format!("{int}.{frac}")
            }
        } else {
            format!("0.{}{digits}", "0".repeat((-exp - 1) as usize))
        }
    } else if n > 1 {
        format!("{}.{}e{exp}", &digits[..1], &digits[1..])
    } else {
        format!("{digits}e{exp}")
    };
    format!("{sign}{body}")
}
