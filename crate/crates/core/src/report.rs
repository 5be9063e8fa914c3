//! Structured reports for planning and placement results.

use std::fmt::Write as _;

use serde::Serialize;

use crate::config_opt::OptimalConfig;
use crate::placement::{Baselines, PlacementResult};
use crate::scenario::{Location, Scenario};
use crate::Result;

#[derive(Debug, Serialize)]
struct Totals {
    bandwidth_hz: f64,
    backhaul_bps: f64,
    cpu_hz: f64,
    storage_bits: f64,
}

#[derive(Debug, Serialize)]
struct CostBreakdown {
    bandwidth: f64,
    backhaul: f64,
    compute: f64,
    storage: f64,
    total: f64,
}

#[derive(Debug, Serialize)]
struct PlanReport<'a> {
    location_m: [f64; 2],
    latency_req_s: f64,
    se_source: &'a str,
    totals: Totals,
    cost: CostBreakdown,
}

fn breakdown(scenario: &Scenario, config: &OptimalConfig) -> CostBreakdown {
    let w = &scenario.cost;
    let c = &config.config;
    CostBreakdown {
        bandwidth: w.bandwidth * c.bandwidth,
        backhaul: w.backhaul * c.backhaul_rate,
        compute: w.compute * c.cpu_freq,
        storage: w.storage * c.storage,
        total: c.cost,
    }
}

/// Totals and cost breakdown as TOML.
pub fn plan_toml(
    scenario: &Scenario,
    loc: Location,
    se_source: &str,
    config: &OptimalConfig,
) -> Result<String> {
    let c = &config.config;
    let report = PlanReport {
        location_m: [loc.x, loc.y],
        latency_req_s: scenario.latency_req,
        se_source,
        totals: Totals {
            bandwidth_hz: c.bandwidth,
            backhaul_bps: c.backhaul_rate,
            cpu_hz: c.cpu_freq,
            storage_bits: c.storage,
        },
        cost: breakdown(scenario, config),
    };
    toml::to_string(&report).map_err(|e| crate::Error::Format(e.to_string()))
}

/// One row per sensor.
pub fn per_user_csv(scenario: &Scenario, config: &OptimalConfig) -> String {
    let mut s = String::from(
        "id,bandwidth_hz,backhaul_bps,cpu_hz,eta,spectral_efficiency,computes,latency_s\n",
    );
    for (i, sensor) in scenario.sensors.iter().enumerate() {
        let a = &config.per_user[i];
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            sensor.id,
            a.bandwidth,
            a.backhaul_rate,
            a.cpu_freq,
            a.eta,
            config.se_per_user[i],
            u8::from(config.computes[i]),
            config.latency[i]
        );
    }
    s
}

/// Human-readable summary of a plan.
pub fn plan_text(scenario: &Scenario, loc: Location, config: &OptimalConfig) -> String {
    let c = &config.config;
    let b = breakdown(scenario, config);
    let mut s = String::new();
    let _ = writeln!(s, "location      ({}, {}) m", loc.x, loc.y);
    let _ = writeln!(s, "bandwidth     {:.6} MHz", c.bandwidth / 1e6);
    let _ = writeln!(s, "backhaul      {:.6} Mbit/s", c.backhaul_rate / 1e6);
    let _ = writeln!(s, "compute       {:.6} Gcycle/s", c.cpu_freq / 1e9);
    let _ = writeln!(s, "storage       {} bit", c.storage);
    let _ = writeln!(
        s,
        "cost          {:.9} (bandwidth {:.9}, backhaul {:.9}, compute {:.9})",
        b.total, b.bandwidth, b.backhaul, b.compute
    );
    let computed = config.computes.iter().filter(|&&c| c).count();
    let _ = writeln!(
        s,
        "sensors       {} ({} computed on the hub)",
        scenario.num_users(),
        computed
    );
    s
}

#[derive(Debug, Serialize)]
struct Marker {
    label: String,
    x_m: f64,
    y_m: f64,
    cost: f64,
}

#[derive(Debug, Serialize)]
struct PlacementReport {
    converged: bool,
    iterations: usize,
    kkt_residual: Option<f64>,
    max_constraint_inactivity: Option<f64>,
    locations: Vec<Marker>,
}

/// SCA outcome with the comparison locations. `extra` holds further
/// labelled locations such as a grid optimum.
pub fn placement_toml(
    sca: &PlacementResult,
    base: &Baselines,
    base_costs: (f64, f64),
    extra: &[(&str, Location, f64)],
) -> Result<String> {
    let mut locations = vec![
        Marker {
            label: "sca".into(),
            x_m: sca.location.x,
            y_m: sca.location.y,
            cost: sca.cost,
        },
        Marker {
            label: "geometric_center_heuristic".into(),
            x_m: base.geometric_center.x,
            y_m: base.geometric_center.y,
            cost: base_costs.0,
        },
        Marker {
            label: "weighted_centroid_heuristic".into(),
            x_m: base.weighted_centroid.x,
            y_m: base.weighted_centroid.y,
            cost: base_costs.1,
        },
    ];
    for (label, loc, cost) in extra {
        locations.push(Marker {
            label: label.to_string(),
            x_m: loc.x,
            y_m: loc.y,
            cost: *cost,
        });
    }
    let report = PlacementReport {
        converged: sca.converged,
        iterations: sca.iterations,
        kkt_residual: sca.kkt_residual,
        max_constraint_inactivity: sca.activity.map(|a| a.max_inactivity()),
        locations,
    };
    toml::to_string(&report).map_err(|e| crate::Error::Format(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::SeSource;
    use crate::config_opt::full_configuration;
    use crate::scenario::generate;
    use crate::Execution;

    #[test]
    fn plan_outputs() {
        let s = generate(1, 1e7, 3).unwrap();
        let c = full_configuration(
            &s,
            Location::ORIGIN,
            SeSource::Approx,
            Execution::Sequential,
        )
        .unwrap();
        let t = plan_toml(&s, Location::ORIGIN, "approx", &c).unwrap();
        let v: toml::Table = toml::from_str(&t).unwrap();
        assert!(v["cost"]["total"].as_float().unwrap() > 0.0);
        let csv = per_user_csv(&s, &c);
        assert_eq!(csv.lines().count(), 4);
        assert!(plan_text(&s, Location::ORIGIN, &c).contains("MHz"));
    }
}
