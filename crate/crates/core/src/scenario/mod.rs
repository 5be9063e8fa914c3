//! Sensors, global physical/economic parameters and scenario generation.
//!
//! All fields are SI base units: hertz, bits, bits/s, cycles/s, watts,
//! meters, seconds. Cost weights are per unit of the corresponding SI
//! quantity (for example `a1` is cost per Hz).

mod file;

use std::collections::HashSet;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use file::{
    apply_override, parse_angle_unit, read_scenario, read_scenario_str, write_scenario,
    write_scenario_string,
};

use crate::{Error, Result};

/// Radius of the disk sensors are scattered on by [`generate`].
pub const DEPLOYMENT_RADIUS: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Sensor {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    /// Task data `D_u` in bits.
    pub data_volume: f64,
    /// CPU cycles needed per input bit, `rho_u`.
    pub compute_intensity: f64,
    /// Output bits per input bit of computation, `zeta_u`, in (0, 1).
    pub output_ratio: f64,
    /// Transmit power in watts.
    pub tx_power: f64,
}

/// Unit the elevation angle is expressed in inside the line-of-sight
/// sigmoid `1 / (1 + a exp(-b (theta - a)))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AngleUnit {
    #[default]
    Degrees,
    Radians,
}

impl AngleUnit {
    /// Factor converting radians to this unit.
    pub fn per_radian(self) -> f64 {
        match self {
            AngleUnit::Degrees => 180.0 / PI,
            AngleUnit::Radians => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AngleUnit::Degrees => "degrees",
            AngleUnit::Radians => "radians",
        }
    }
}

/// How `noise_power` enters the SNR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseModel {
    /// `noise_power` is a total noise power in W; the rate is linear in bandwidth.
    #[default]
    FixedPower,
    /// `noise_power` is a density in W/Hz; noise grows with the allocated bandwidth.
    Psd,
}

impl NoiseModel {
    pub fn name(self) -> &'static str {
        match self {
            NoiseModel::FixedPower => "fixed_power",
            NoiseModel::Psd => "psd",
        }
    }
}

/// Large-scale propagation constants: sigmoid `(a, b)` and excess path loss
/// in dB for line-of-sight and non-line-of-sight links.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    pub a: f64,
    pub b: f64,
    pub eta_los: f64,
    pub eta_nlos: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            a: 4.880,
            b: 0.429,
            eta_los: 0.1,
            eta_nlos: 21.0,
        }
    }
}

/// Linear cost weights, per Hz, per bit/s, per cycle/s and per bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostWeights {
    pub bandwidth: f64,
    pub backhaul: f64,
    pub compute: f64,
    pub storage: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            bandwidth: 1e-6,
            backhaul: 3e-6,
            compute: 1e-9,
            storage: 1e-6,
        }
    }
}

impl CostWeights {
    /// `a1 B + a2 R^S + a3 F + a4 V`.
    pub fn cost(&self, bandwidth: f64, backhaul: f64, compute: f64, storage: f64) -> f64 {
        self.bandwidth * bandwidth
            + self.backhaul * backhaul
            + self.compute * compute
            + self.storage * storage
    }

    /// Cycles per output bit above which uploading raw data is cheaper than
    /// computing. `+inf` when compute is free.
    pub fn compute_threshold(&self) -> f64 {
        if self.compute == 0.0 {
            f64::INFINITY
        } else {
            self.backhaul / self.compute
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub sensors: Vec<Sensor>,
    /// Deadline `T_req` for every sensor's upload, seconds.
    pub latency_req: f64,
    /// Hub altitude, meters.
    pub uav_height: f64,
    pub carrier_freq: f64,
    pub light_speed: f64,
    pub channel: ChannelParams,
    /// W for [`NoiseModel::FixedPower`], W/Hz for [`NoiseModel::Psd`].
    pub noise_power: f64,
    pub noise_model: NoiseModel,
    pub cost: CostWeights,
    pub angle_unit: AngleUnit,
}

impl Scenario {
    /// Default global parameters around the given sensors: 5.8 GHz carrier,
    /// -114 dBm noise, 100 s deadline, 1000 m altitude.
    pub fn with_defaults(sensors: Vec<Sensor>) -> Self {
        Self {
            sensors,
            latency_req: 100.0,
            uav_height: 1000.0,
            carrier_freq: 5.8e9,
            light_speed: 3e8,
            channel: ChannelParams::default(),
            noise_power: crate::units::dbm_to_watts(-114.0),
            noise_model: NoiseModel::FixedPower,
            cost: CostWeights::default(),
            angle_unit: AngleUnit::Degrees,
        }
    }

    /// Returns `self` unchanged if [`validate`] finds nothing.
    pub fn validated(self) -> Result<Self> {
        let violations = validate(&self);
        if violations.is_empty() {
            Ok(self)
        } else {
            Err(Error::InvalidScenario(violations))
        }
    }

    pub fn num_users(&self) -> usize {
        self.sensors.len()
    }

    /// Required average throughput `D_u / T_req` of each sensor.
    pub fn required_rates(&self) -> impl Iterator<Item = f64> + '_ {
        self.sensors
            .iter()
            .map(|s| s.data_volume / self.latency_req)
    }

    /// Scales every sensor's data volume by `factor`.
    pub fn scale_data(&mut self, factor: f64) {
        for s in &mut self.sensors {
            s.data_volume *= factor;
        }
    }
}

/// Horizontal position of the hub; altitude comes from the scenario.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Location {
    pub x: f64,
    pub y: f64,
}

impl Location {
    pub const ORIGIN: Location = Location { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn horizontal_distance(&self, sensor: &Sensor) -> f64 {
        (self.x - sensor.x).hypot(self.y - sensor.y)
    }
}

/// Orchestration variables of one sensor.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PerUserAllocation {
    pub bandwidth: f64,
    pub backhaul_rate: f64,
    pub cpu_freq: f64,
    /// Fraction of the data routed through compute before upload.
    pub eta: f64,
}

/// Totals provisioned on the hub and their weighted cost.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ResourceConfig {
    pub bandwidth: f64,
    pub backhaul_rate: f64,
    pub cpu_freq: f64,
    pub storage: f64,
    pub cost: f64,
}

impl ResourceConfig {
    pub fn new(
        weights: &CostWeights,
        bandwidth: f64,
        backhaul_rate: f64,
        cpu_freq: f64,
        storage: f64,
    ) -> Self {
        Self {
            bandwidth,
            backhaul_rate,
            cpu_freq,
            storage,
            cost: weights.cost(bandwidth, backhaul_rate, cpu_freq, storage),
        }
    }

    /// Cost without the storage term.
    pub fn three_weight_cost(&self, weights: &CostWeights) -> f64 {
        weights.cost(self.bandwidth, self.backhaul_rate, self.cpu_freq, 0.0)
    }
}

/// Every broken invariant of `scenario`, one human-readable line each.
pub fn validate(scenario: &Scenario) -> Vec<String> {
    let mut out = Vec::new();
    let mut check = |ok: bool, msg: String| {
        if !ok {
            out.push(msg);
        }
    };

    let s = scenario;
    check(
        s.latency_req > 0.0 && s.latency_req.is_finite(),
        "latency_req must be positive".into(),
    );
    check(
        s.uav_height > 0.0 && s.uav_height.is_finite(),
        "uav_height must be positive".into(),
    );
    check(
        s.carrier_freq > 0.0 && s.carrier_freq.is_finite(),
        "carrier_freq must be positive".into(),
    );
    check(
        s.light_speed > 0.0 && s.light_speed.is_finite(),
        "light_speed must be positive".into(),
    );
    check(
        s.noise_power > 0.0 && s.noise_power.is_finite(),
        "noise_power must be positive".into(),
    );
    check(
        s.channel.eta_nlos > s.channel.eta_los,
        "eta_nlos must exceed eta_los".into(),
    );
    check(
        [
            s.channel.a,
            s.channel.b,
            s.channel.eta_los,
            s.channel.eta_nlos,
        ]
        .iter()
        .all(|v| v.is_finite()),
        "channel constants must be finite".into(),
    );
    for (name, w) in [
        ("a1", s.cost.bandwidth),
        ("a2", s.cost.backhaul),
        ("a3", s.cost.compute),
        ("a4", s.cost.storage),
    ] {
        check(
            w >= 0.0 && w.is_finite(),
            format!("cost weight {name} must be non-negative"),
        );
    }
    check(
        !s.sensors.is_empty(),
        "at least one sensor is required".into(),
    );

    let mut seen = HashSet::new();
    for sensor in &s.sensors {
        let id = sensor.id;
        check(seen.insert(id), format!("sensor {id}: duplicate id"));
        check(
            sensor.x.is_finite() && sensor.y.is_finite(),
            format!("sensor {id}: position must be finite"),
        );
        check(
            sensor.data_volume > 0.0 && sensor.data_volume.is_finite(),
            format!("sensor {id}: data_volume must be positive"),
        );
        check(
            sensor.compute_intensity > 0.0 && sensor.compute_intensity.is_finite(),
            format!("sensor {id}: compute_intensity must be positive"),
        );
        check(
            sensor.output_ratio > 0.0 && sensor.output_ratio < 1.0,
            format!("sensor {id}: output_ratio outside (0,1)"),
        );
        check(
            sensor.tx_power > 0.0 && sensor.tx_power.is_finite(),
            format!("sensor {id}: tx_power must be positive"),
        );
    }
    out
}

/// Random scenario with `n_users` sensors on a 1000 m disk and default
/// global parameters. Data volumes are uniform on `[0.1 dmax, dmax]`,
/// intensities on `[1000, 5000]` cycles/bit, output ratios on `[0.01, 0.1]`.
pub fn generate(seed: u64, dmax: f64, n_users: usize) -> Result<Scenario> {
    if n_users == 0 {
        return Err(Error::InvalidInput("n_users must be at least 1".into()));
    }
    if !(dmax > 0.0 && dmax.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "dmax must be positive, got {dmax}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sensors = (0..n_users)
        .map(|i| {
            let data_volume = rng.random_range(0.1 * dmax..=dmax);
            let compute_intensity = rng.random_range(1000.0..=5000.0);
            let output_ratio = rng.random_range(0.01..=0.1);
            // sqrt of a uniform radius fraction gives a uniform density on the disk
            let r = DEPLOYMENT_RADIUS * rng.random::<f64>().sqrt();
            let phi = 2.0 * PI * rng.random::<f64>();
            Sensor {
                id: i as u32 + 1,
                x: r * phi.cos(),
                y: r * phi.sin(),
                data_volume,
                compute_intensity,
                output_ratio,
                tx_power: 1.0,
            }
        })
        .collect();
    Ok(Scenario::with_defaults(sensors))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sensor(id: u32) -> Sensor {
        Sensor {
            id,
            x: 0.0,
            y: 0.0,
            data_volume: 1e7,
            compute_intensity: 2000.0,
            output_ratio: 0.05,
            tx_power: 1.0,
        }
    }

    #[test]
    fn default_scenario_is_valid() {
        let s = generate(0, 1e8, 5).unwrap();
        assert!(validate(&s).is_empty());
        assert_eq!(s.num_users(), 5);
    }

    #[test]
    fn output_ratio_boundary() {
        let mut s = Scenario::with_defaults(vec![sensor(1)]);
        s.sensors[0].output_ratio = 1.5;
        let v = validate(&s);
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("output_ratio outside (0,1)"), "{v:?}");
    }

    #[test]
    fn zero_data_volume() {
        let mut s = Scenario::with_defaults(vec![sensor(1)]);
        s.sensors[0].data_volume = 0.0;
        let v = validate(&s);
        assert!(
            v.iter().any(|m| m.contains("data_volume must be positive")),
            "{v:?}"
        );
    }

    #[test]
    fn duplicate_ids_and_bad_globals() {
        let mut s = Scenario::with_defaults(vec![sensor(3), sensor(3)]);
        s.latency_req = 0.0;
        s.channel.eta_nlos = 0.0;
        s.cost.compute = -1.0;
        let v = validate(&s);
        assert_eq!(v.len(), 4, "{v:?}");
        assert!(s.validated().is_err());
    }

    #[test]
    fn generate_ranges() {
        let s = generate(1, 1e8, 5).unwrap();
        for u in &s.sensors {
            assert!((1e7..=1e8).contains(&u.data_volume));
            assert!((1000.0..=5000.0).contains(&u.compute_intensity));
            assert!((0.01..=0.1).contains(&u.output_ratio));
            assert!(u.x.hypot(u.y) <= DEPLOYMENT_RADIUS);
            assert_eq!(u.tx_power, 1.0);
        }
        assert_eq!(s.latency_req, 100.0);
        assert_eq!(s.uav_height, 1000.0);
        assert_eq!(s.carrier_freq, 5.8e9);

        let one = generate(2, 1e6, 1).unwrap();
        assert_eq!(one.num_users(), 1);
        assert!((1e5..=1e6).contains(&one.sensors[0].data_volume));
    }

    #[test]
    fn generate_is_deterministic() {
        assert_eq!(generate(7, 1e8, 5).unwrap(), generate(7, 1e8, 5).unwrap());
        assert_ne!(generate(7, 1e8, 5).unwrap(), generate(8, 1e8, 5).unwrap());
    }

    #[test]
    fn generate_rejects_empty() {
        assert!(generate(1, 1e8, 0).is_err());
        assert!(generate(1, 0.0, 3).is_err());
    }

    #[test]
    fn generated_scenarios_always_validate() {
        for seed in 0..1000 {
            let s = generate(seed, 1e8, 5).unwrap();
            assert!(validate(&s).is_empty(), "seed {seed}");
        }
    }

    #[test]
    fn compute_threshold_with_free_compute() {
        let mut w = CostWeights::default();
        assert!((w.compute_threshold() - 3000.0).abs() < 1e-9);
        w.compute = 0.0;
        assert_eq!(w.compute_threshold(), f64::INFINITY);
    }
}
