//! Comparison schemes: sequential processing and equal resource shares.

use crate::channel::SeSource;
use crate::config_opt::{full_configuration, task_of, user_links, OptimalConfig};
use crate::dataflow::Resources;
use crate::scenario::{Location, NoiseModel, PerUserAllocation, ResourceConfig, Scenario};
use crate::scheduling::{optimal_eta, optimized_latency};
use crate::{Error, Execution, Result};

/// Split-grid resolution of the sequential scheme.
pub const SEQUENTIAL_ETA_STEP: f64 = 1e-4;

/// Cost-minimal allocation of one sensor under sequential processing at a
/// fixed split: minimize `sum w_i x_i` subject to `sum c_i / x_i <= T`.
/// Stationarity gives `x_i = sqrt(c_i / w_i) S / T` with
/// `S = sum sqrt(c_i w_i)`, and cost `S^2 / T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequentialAllocation {
    pub eta: f64,
    pub bandwidth: f64,
    pub backhaul: f64,
    pub cpu: f64,
    pub cost: f64,
}

/// `D / (B SE) + eta D rho / F + (zeta eta + 1 - eta) D / R_S`.
#[allow(clippy::too_many_arguments)]
pub fn sequential_latency(
    data: f64,
    se: f64,
    rho: f64,
    zeta: f64,
    eta: f64,
    b: f64,
    rs: f64,
    f: f64,
) -> f64 {
    let compute = if eta > 0.0 { eta * data * rho / f } else { 0.0 };
    data / (b * se) + compute + (zeta * eta + 1.0 - eta) * data / rs
}

pub fn sequential_at_eta(
    data: f64,
    se: f64,
    rho: f64,
    zeta: f64,
    eta: f64,
    t_req: f64,
    weights: [f64; 3],
) -> SequentialAllocation {
    let c = [data / se, eta * data * rho, (zeta * eta + 1.0 - eta) * data];
    let s: f64 = c.iter().zip(weights).map(|(ci, wi)| (ci * wi).sqrt()).sum();
    let x = |i: usize| (c[i] / weights[i]).sqrt() * s / t_req;
    SequentialAllocation {
        eta,
        bandwidth: x(0),
        cpu: x(1),
        backhaul: x(2),
        cost: s * s / t_req,
    }
}

/// Best allocation of one sensor over the split grid `{0, step, ..., 1}`.
pub fn sequential_user(
    data: f64,
    se: f64,
    rho: f64,
    zeta: f64,
    t_req: f64,
    weights: [f64; 3],
) -> SequentialAllocation {
    let n = (1.0 / SEQUENTIAL_ETA_STEP).round() as usize;
    let mut best = sequential_at_eta(data, se, rho, zeta, 0.0, t_req, weights);
    for i in 1..=n {
        let cand = sequential_at_eta(data, se, rho, zeta, i as f64 / n as f64, t_req, weights);
        if cand.cost < best.cost {
            best = cand;
        }
    }
    best
}

/// Scheme 1: each sensor's data is received, then computed, then uploaded,
/// one stage after the other. The hub buffers the whole data volume, which
/// is reported as storage.
pub fn scheme1_config(scenario: &Scenario, loc: Location) -> Result<OptimalConfig> {
    if scenario.noise_model == NoiseModel::Psd {
        return Err(Error::Unsupported(
            "sequential scheme with a noise density".into(),
        ));
    }
    let w = &scenario.cost;
    let weights = [w.bandwidth, w.backhaul, w.compute];
    if !weights.iter().all(|&x| x > 0.0) {
        return Err(Error::Unsupported(
            "sequential scheme needs positive a1, a2, a3".into(),
        ));
    }
    let t = scenario.latency_req;
    let links = user_links(scenario, loc, SeSource::Approx, Execution::Sequential)?;
    let mut per_user = Vec::with_capacity(links.len());
    let mut se = Vec::with_capacity(links.len());
    let mut computes = Vec::with_capacity(links.len());
    let mut latency = Vec::with_capacity(links.len());
    for (s, link) in scenario.sensors.iter().zip(&links) {
        let a = sequential_user(
            s.data_volume,
            link.spectral_efficiency,
            s.compute_intensity,
            s.output_ratio,
            t,
            [w.bandwidth, w.compute, w.backhaul],
        );
        per_user.push(PerUserAllocation {
            bandwidth: a.bandwidth,
            backhaul_rate: a.backhaul,
            cpu_freq: a.cpu,
            eta: a.eta,
        });
        se.push(link.spectral_efficiency);
        computes.push(a.eta > 0.0);
        latency.push(sequential_latency(
            s.data_volume,
            link.spectral_efficiency,
            s.compute_intensity,
            s.output_ratio,
            a.eta,
            a.bandwidth,
            a.backhaul,
            a.cpu,
        ));
    }
    let storage: f64 = scenario.sensors.iter().map(|s| s.data_volume).sum();
    let config = ResourceConfig::new(
        w,
        per_user.iter().map(|a| a.bandwidth).sum(),
        per_user.iter().map(|a| a.backhaul_rate).sum(),
        per_user.iter().map(|a| a.cpu_freq).sum(),
        storage,
    );
    Ok(OptimalConfig {
        config,
        per_user,
        se_per_user: se,
        computes,
        latency,
    })
}

const GOLDEN_ITERS: usize = 200;
const BISECTION_ITERS: usize = 200;

/// Scheme 2: every sensor gets the same share of each total. The bandwidth
/// total is set by the most demanding sensor; backhaul and compute totals
/// are then minimized by a golden-section search on the backhaul total with
/// an inner bisection for the smallest feasible compute total.
pub fn scheme2_config(scenario: &Scenario, loc: Location) -> Result<OptimalConfig> {
    let proposed = full_configuration(scenario, loc, SeSource::Approx, Execution::Sequential)?;
    let links = user_links(scenario, loc, SeSource::Approx, Execution::Sequential)?;
    let n = scenario.num_users() as f64;
    let t = scenario.latency_req;
    let b_total = n * proposed
        .per_user
        .iter()
        .map(|a| a.bandwidth)
        .fold(0.0, f64::max);
    let rates: Vec<f64> = links.iter().map(|l| l.rate(b_total / n)).collect();

    let feasible = |rs_total: f64, f_total: f64| {
        scenario.sensors.iter().zip(&rates).all(|(s, &r)| {
            let res = Resources::new(r, rs_total / n, f_total / n);
            optimized_latency(&res, &task_of(s)) <= t * (1.0 + 1e-12)
        })
    };
    let need: Vec<f64> = scenario.sensors.iter().map(|s| s.data_volume / t).collect();
    let rs_lo = n * scenario
        .sensors
        .iter()
        .zip(&need)
        .map(|(s, d)| s.output_ratio * d)
        .fold(0.0, f64::max);
    let rs_hi = n * need.iter().copied().fold(0.0, f64::max);
    let f_hi = n * scenario
        .sensors
        .iter()
        .zip(&need)
        .map(|(s, d)| s.compute_intensity * d / (1.0 - s.output_ratio))
        .fold(0.0, f64::max);

    // smallest feasible compute total for a backhaul total
    let min_cpu = |rs_total: f64| -> f64 {
        if feasible(rs_total, 0.0) {
            return 0.0;
        }
        let (mut lo, mut hi) = (0.0, f_hi);
        while !feasible(rs_total, hi) {
            hi *= 2.0;
        }
        for _ in 0..BISECTION_ITERS {
            let mid = 0.5 * (lo + hi);
            if feasible(rs_total, mid) {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        hi
    };
    let w = &scenario.cost;
    let cost = |rs_total: f64| {
        let f = min_cpu(rs_total);
        (w.backhaul * rs_total + w.compute * f, f)
    };

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (rs_lo, rs_hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (cost(c).0, cost(d).0);
    for _ in 0..GOLDEN_ITERS {
        if b - a <= 1e-13 * b {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = cost(c).0;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = cost(d).0;
        }
    }
    let mut best = (rs_hi, cost(rs_hi));
    for rs in [rs_lo, a, c, d, b] {
        let cand = cost(rs);
        if cand.0 < best.1 .0 {
            best = (rs, cand);
        }
    }
    let (rs_total, (_, f_total)) = best;

    let mut per_user = Vec::with_capacity(scenario.num_users());
    let mut latency = Vec::with_capacity(scenario.num_users());
    let mut computes = Vec::with_capacity(scenario.num_users());
    for (s, &r) in scenario.sensors.iter().zip(&rates) {
        let res = Resources::new(r, rs_total / n, f_total / n);
        let opt = optimal_eta(&res, &task_of(s))?;
        per_user.push(PerUserAllocation {
            bandwidth: b_total / n,
            backhaul_rate: rs_total / n,
            cpu_freq: f_total / n,
            eta: opt.eta,
        });
        latency.push(opt.latency);
        computes.push(opt.eta > 0.0);
    }
    Ok(OptimalConfig {
        config: ResourceConfig::new(w, b_total, rs_total, f_total, 0.0),
        per_user,
        se_per_user: links
            .iter()
            .map(|l| l.rate(b_total / n) / (b_total / n))
            .collect(),
        computes,
        latency,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate, Sensor};

    #[test]
    fn sequential_allocation_meets_deadline() {
        let a = sequential_at_eta(5e7, 6.0, 3000.0, 0.05, 0.7, 100.0, [1e-6, 1e-9, 3e-6]);
        let t = sequential_latency(5e7, 6.0, 3000.0, 0.05, 0.7, a.bandwidth, a.backhaul, a.cpu);
        assert!((t - 100.0).abs() < 1e-9);
        let direct = 1e-6 * a.bandwidth + 3e-6 * a.backhaul + 1e-9 * a.cpu;
        assert!((direct - a.cost).abs() < 1e-12 * a.cost);
    }

    #[test]
    fn schemes_cost_at_least_proposed() {
        for seed in 0..10 {
            let s = generate(seed, 5e7, 5).unwrap();
            let p = full_configuration(
                &s,
                Location::ORIGIN,
                SeSource::Approx,
                Execution::Sequential,
            )
            .unwrap();
            let c1 = scheme1_config(&s, Location::ORIGIN).unwrap();
            let c2 = scheme2_config(&s, Location::ORIGIN).unwrap();
            let base = p.config.three_weight_cost(&s.cost);
            assert!(c1.config.three_weight_cost(&s.cost) >= base * (1.0 - 1e-9));
            assert!(c2.config.three_weight_cost(&s.cost) >= base * (1.0 - 1e-9));
            for l in &c2.latency {
                assert!(*l <= s.latency_req * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn identical_sensors_scheme2_equals_proposed() {
        let sensor = |id| Sensor {
            id,
            x: 100.0,
            y: -40.0,
            data_volume: 3e7,
            compute_intensity: 2500.0,
            output_ratio: 0.04,
            tx_power: 1.0,
        };
        let s = Scenario::with_defaults(vec![sensor(1), sensor(2), sensor(3)]);
        let p = full_configuration(
            &s,
            Location::ORIGIN,
            SeSource::Approx,
            Execution::Sequential,
        )
        .unwrap();
        let c2 = scheme2_config(&s, Location::ORIGIN).unwrap();
        let (a, b) = (
            p.config.three_weight_cost(&s.cost),
            c2.config.three_weight_cost(&s.cost),
        );
        assert!((a - b).abs() <= 1e-9 * a, "{a} vs {b}");
    }

    #[test]
    fn sequential_rejects_free_resources() {
        let mut s = generate(1, 1e7, 2).unwrap();
        s.cost.compute = 0.0;
        assert!(matches!(
            scheme1_config(&s, Location::ORIGIN),
            Err(Error::Unsupported(_))
        ));
    }
}
