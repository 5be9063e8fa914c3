//! TOML scenario files with explicit unit suffixes.
//!
//! Quantities are strings of the form `"<number> <unit>"` and are converted
//! to SI on load by [`crate::units`]. The writer emits one canonical layout,
//! so `write(read(text)) == text` for any file it produced. See
//! `docs/scenario-format.md` for the schema.

use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use super::{AngleUnit, NoiseModel, Scenario, Sensor};
use crate::units::{format_quantity, parse_quantity, Dimension};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
enum Number {
    Float(f64),
    Int(i64),
}

impl Number {
    fn value(self) -> f64 {
        match self {
            Number::Float(v) => v,
            Number::Int(v) => v as f64,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    latency_req: Option<String>,
    uav_height: Option<String>,
    carrier_freq: Option<String>,
    light_speed: Option<String>,
    noise_power: Option<String>,
    noise_model: Option<String>,
    angle_unit: Option<String>,
    #[serde(default)]
    channel: RawChannel,
    #[serde(default)]
    cost: RawCost,
    #[serde(default)]
    sensors: Vec<RawSensor>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    a: Option<Number>,
    b: Option<Number>,
    eta_los: Option<String>,
    eta_nlos: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCost {
    a1: Option<String>,
    a2: Option<String>,
    a3: Option<String>,
    a4: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSensor {
    id: u32,
    pos_x: String,
    pos_y: String,
    data_volume: String,
    compute_intensity: String,
    output_ratio: Number,
    tx_power: Option<String>,
}

/// Parses scenario text. Omitted global keys keep their defaults; the
/// result is not validated.
pub fn read_scenario_str(text: &str) -> Result<Scenario> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| Error::Format(e.to_string()))?;

    let sensors = raw
        .sensors
        .into_iter()
        .map(|s| {
            let id = s.id;
            let ctx = |e: Error| Error::Format(format!("sensor {id}: {e}"));
            Ok(Sensor {
                id,
                x: parse_quantity(&s.pos_x, Dimension::Length).map_err(ctx)?,
                y: parse_quantity(&s.pos_y, Dimension::Length).map_err(ctx)?,
                data_volume: parse_quantity(&s.data_volume, Dimension::Data).map_err(ctx)?,
                compute_intensity: parse_quantity(&s.compute_intensity, Dimension::Intensity)
                    .map_err(ctx)?,
                output_ratio: s.output_ratio.value(),
                tx_power: match &s.tx_power {
                    Some(p) => parse_quantity(p, Dimension::Power).map_err(ctx)?,
                    None => 1.0,
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut scenario = Scenario::with_defaults(sensors);
    // the noise model decides how noise_power is read, so it goes first
    if let Some(v) = &raw.noise_model {
        set_field(&mut scenario, "noise_model", v)?;
    }
    let strings = [
        ("latency_req", &raw.latency_req),
        ("uav_height", &raw.uav_height),
        ("carrier_freq", &raw.carrier_freq),
        ("light_speed", &raw.light_speed),
        ("noise_power", &raw.noise_power),
        ("angle_unit", &raw.angle_unit),
        ("channel.eta_los", &raw.channel.eta_los),
        ("channel.eta_nlos", &raw.channel.eta_nlos),
        ("cost.a1", &raw.cost.a1),
        ("cost.a2", &raw.cost.a2),
        ("cost.a3", &raw.cost.a3),
        ("cost.a4", &raw.cost.a4),
    ];
    for (key, value) in strings {
        if let Some(v) = value {
            set_field(&mut scenario, key, v)?;
        }
    }
    if let Some(a) = raw.channel.a {
        scenario.channel.a = a.value();
    }
    if let Some(b) = raw.channel.b {
        scenario.channel.b = b.value();
    }
    Ok(scenario)
}

pub fn read_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_scenario_str(&text)
}

/// Canonical text form of `scenario`.
pub fn write_scenario_string(scenario: &Scenario) -> String {
    let s = scenario;
    let mut out = String::new();
    let q = |v: f64, d: Dimension| quote(&format_quantity(v, d));
    let noise_dim = match s.noise_model {
        NoiseModel::FixedPower => Dimension::Power,
        NoiseModel::Psd => Dimension::PowerDensity,
    };

    let _ = writeln!(out, "latency_req = {}", q(s.latency_req, Dimension::Time));
    let _ = writeln!(out, "uav_height = {}", q(s.uav_height, Dimension::Length));
    let _ = writeln!(
        out,
        "carrier_freq = {}",
        q(s.carrier_freq, Dimension::Frequency)
    );
    let _ = writeln!(out, "light_speed = {}", q(s.light_speed, Dimension::Speed));
    let _ = writeln!(out, "noise_power = {}", q(s.noise_power, noise_dim));
    let _ = writeln!(out, "noise_model = {}", quote(s.noise_model.name()));
    let _ = writeln!(out, "angle_unit = {}", quote(s.angle_unit.name()));

    let _ = writeln!(out, "\n[channel]");
    let _ = writeln!(out, "a = {}", float(s.channel.a));
    let _ = writeln!(out, "b = {}", float(s.channel.b));
    let _ = writeln!(
        out,
        "eta_los = {}",
        q(s.channel.eta_los, Dimension::Decibel)
    );
    let _ = writeln!(
        out,
        "eta_nlos = {}",
        q(s.channel.eta_nlos, Dimension::Decibel)
    );

    let _ = writeln!(out, "\n[cost]");
    let _ = writeln!(out, "a1 = {}", q(s.cost.bandwidth, Dimension::PerFrequency));
    let _ = writeln!(out, "a2 = {}", q(s.cost.backhaul, Dimension::PerDataRate));
    let _ = writeln!(out, "a3 = {}", q(s.cost.compute, Dimension::PerCycleRate));
    let _ = writeln!(out, "a4 = {}", q(s.cost.storage, Dimension::PerData));

    for sensor in &s.sensors {
        let _ = writeln!(out, "\n[[sensors]]");
        let _ = writeln!(out, "id = {}", sensor.id);
        let _ = writeln!(out, "pos_x = {}", q(sensor.x, Dimension::Length));
        let _ = writeln!(out, "pos_y = {}", q(sensor.y, Dimension::Length));
        let _ = writeln!(
            out,
            "data_volume = {}",
            q(sensor.data_volume, Dimension::Data)
        );
        let _ = writeln!(
            out,
            "compute_intensity = {}",
            q(sensor.compute_intensity, Dimension::Intensity)
        );
        let _ = writeln!(out, "output_ratio = {}", float(sensor.output_ratio));
        let _ = writeln!(out, "tx_power = {}", q(sensor.tx_power, Dimension::Power));
    }
    out
}

pub fn write_scenario(path: &Path, scenario: &Scenario) -> Result<()> {
    std::fs::write(path, write_scenario_string(scenario)).map_err(|e| Error::io(path, e))
}

fn quote(s: &str) -> String {
    format!("\"{s}\"")
}

/// Shortest round-trip float literal that TOML reads as a float.
fn float(v: f64) -> String {
    format!("{v:?}")
}

/// Applies a `key=value` override. Keys are the file keys, with tables
/// written as `channel.a`, `cost.a2` and per-sensor fields as
/// `sensor.<id>.<field>`. Values use the same unit syntax as the file.
pub fn apply_override(scenario: &mut Scenario, assignment: &str) -> Result<()> {
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Format(format!("override `{assignment}`: expected key=value")))?;
    set_field(scenario, key.trim(), value.trim().trim_matches('"'))
}

fn set_field(s: &mut Scenario, key: &str, value: &str) -> Result<()> {
    let num = |d: Dimension| parse_quantity(value, d);
    let plain = || {
        crate::units::parse_shifted(value, 0)
            .map_err(|_| Error::Format(format!("`{key}`: `{value}` is not a number")))
    };
    match key {
        "latency_req" => s.latency_req = num(Dimension::Time)?,
        "uav_height" => s.uav_height = num(Dimension::Length)?,
        "carrier_freq" => s.carrier_freq = num(Dimension::Frequency)?,
        "light_speed" => s.light_speed = num(Dimension::Speed)?,
        "noise_power" => {
            s.noise_power = match s.noise_model {
                NoiseModel::FixedPower => num(Dimension::Power)?,
                NoiseModel::Psd => num(Dimension::PowerDensity)?,
            }
        }
        "noise_model" => {
            s.noise_model = match value {
                "fixed_power" => NoiseModel::FixedPower,
                "psd" => NoiseModel::Psd,
                _ => return Err(Error::Format(format!("unknown noise_model `{value}`"))),
            }
        }
        "angle_unit" => s.angle_unit = parse_angle_unit(value)?,
        "channel.a" => s.channel.a = plain()?,
        "channel.b" => s.channel.b = plain()?,
        "channel.eta_los" => s.channel.eta_los = num(Dimension::Decibel)?,
        "channel.eta_nlos" => s.channel.eta_nlos = num(Dimension::Decibel)?,
        "cost.a1" => s.cost.bandwidth = num(Dimension::PerFrequency)?,
        "cost.a2" => s.cost.backhaul = num(Dimension::PerDataRate)?,
        "cost.a3" => s.cost.compute = num(Dimension::PerCycleRate)?,
        "cost.a4" => s.cost.storage = num(Dimension::PerData)?,
        _ => return set_sensor_field(s, key, value),
    }
    Ok(())
}

fn set_sensor_field(s: &mut Scenario, key: &str, value: &str) -> Result<()> {
    let unknown = || Error::Format(format!("unknown scenario key `{key}`"));
    let rest = key.strip_prefix("sensor.").ok_or_else(unknown)?;
    let (id, field) = rest.split_once('.').ok_or_else(unknown)?;
    let id: u32 = id.parse().map_err(|_| unknown())?;
    let sensor = s
        .sensors
        .iter_mut()
        .find(|x| x.id == id)
        .ok_or_else(|| Error::Format(format!("override `{key}`: no sensor with id {id}")))?;
    let num = |d: Dimension| parse_quantity(value, d);
    match field {
        "pos_x" => sensor.x = num(Dimension::Length)?,
        "pos_y" => sensor.y = num(Dimension::Length)?,
        "data_volume" => sensor.data_volume = num(Dimension::Data)?,
        "compute_intensity" => sensor.compute_intensity = num(Dimension::Intensity)?,
        "output_ratio" => sensor.output_ratio = crate::units::parse_shifted(value, 0)?,
        "tx_power" => sensor.tx_power = num(Dimension::Power)?,
        _ => return Err(unknown()),
    }
    Ok(())
}

pub fn parse_angle_unit(value: &str) -> Result<AngleUnit> {
    match value {
        "deg" | "degrees" => Ok(AngleUnit::Degrees),
        "rad" | "radians" => Ok(AngleUnit::Radians),
        _ => Err(Error::Format(format!("unknown angle unit `{value}`"))),
    }
}
