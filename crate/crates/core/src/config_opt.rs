//! Closed-form cost-optimal resource configuration at a fixed hub location.
//!
//! Every sensor gets exactly the bandwidth that makes its link rate equal to
//! `D_u / T_req`. Each sensor is then either computed on the hub (backhaul
//! `zeta D / T`, cpu `rho D / T`) or forwarded raw (backhaul `D / T`),
//! whichever is cheaper: compute wins when `rho / (1 - zeta) <= a2 / a3`.

use crate::channel::{channel_state, SeSource};
use crate::dataflow::{latency_storage, Resources, Task};
use crate::scenario::{Location, NoiseModel, PerUserAllocation, ResourceConfig, Scenario, Sensor};
use crate::scheduling::{optimal_eta, optimized_latency};
use crate::{Error, Execution, Result};

/// Rate-versus-bandwidth map of one sensor at a fixed location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserLink {
    pub id: u32,
    /// `p l^2 / sigma^2` (per hertz with a noise density).
    pub gamma: f64,
    /// Bits/s/Hz; only meaningful with a fixed noise power.
    pub spectral_efficiency: f64,
    noise_model: NoiseModel,
    source: SeSource,
}

impl UserLink {
    pub fn new(
        sensor: &Sensor,
        scenario: &Scenario,
        loc: Location,
        source: SeSource,
        exec: Execution,
    ) -> Result<Self> {
        let gamma = channel_state(loc, sensor, scenario).mean_snr;
        if !(gamma > 0.0) {
            return Err(Error::Unreachable {
                id: sensor.id,
                se: 0.0,
            });
        }
        let source = match source {
            SeSource::MonteCarlo { samples, seed } => SeSource::MonteCarlo {
                samples,
                seed: seed.wrapping_add(u64::from(sensor.id)),
            },
            s => s,
        };
        let spectral_efficiency = match scenario.noise_model {
            NoiseModel::FixedPower => source.spectral_efficiency(gamma, exec)?,
            NoiseModel::Psd => {
                if matches!(source, SeSource::MonteCarlo { .. }) {
                    return Err(Error::Unsupported(
                        "Monte Carlo spectral efficiency with a noise density".into(),
                    ));
                }
                f64::NAN
            }
        };
        if scenario.noise_model == NoiseModel::FixedPower && !(spectral_efficiency > 0.0) {
            return Err(Error::Unreachable {
                id: sensor.id,
                se: spectral_efficiency,
            });
        }
        Ok(Self {
            id: sensor.id,
            gamma,
            spectral_efficiency,
            noise_model: scenario.noise_model,
            source,
        })
    }

    /// Ergodic rate in bits/s with `bandwidth` Hz.
    pub fn rate(&self, bandwidth: f64) -> f64 {
        if bandwidth <= 0.0 {
            return 0.0;
        }
        match self.noise_model {
            NoiseModel::FixedPower => bandwidth * self.spectral_efficiency,
            NoiseModel::Psd => {
                bandwidth
                    * self
                        .source
                        .spectral_efficiency(self.gamma / bandwidth, Execution::Sequential)
                        .unwrap_or(0.0)
            }
        }
    }

    /// Smallest bandwidth achieving `rate` bits/s.
    pub fn inverse_rate(&self, rate: f64) -> Result<f64> {
        if rate <= 0.0 {
            return Ok(0.0);
        }
        match self.noise_model {
            NoiseModel::FixedPower => Ok(rate / self.spectral_efficiency),
            NoiseModel::Psd => {
                // rate(B) increases to gamma / ln 2 as B grows
                let cap = self.gamma / std::f64::consts::LN_2;
                if rate >= cap * (1.0 - 1e-9) {
                    return Err(Error::Infeasible(format!(
                        "sensor {}: rate {rate} exceeds the wideband limit {cap}",
                        self.id
                    )));
                }
                let mut lo = 0.0;
                let mut hi = 1.0;
                while self.rate(hi) < rate {
                    hi *= 2.0;
                    if !hi.is_finite() {
                        return Err(Error::Infeasible(format!(
                            "sensor {}: rate {rate}",
                            self.id
                        )));
                    }
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.rate(mid) < rate {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 1e-15 * hi {
                        break;
                    }
                }
                Ok(hi)
            }
        }
    }
}

pub fn user_links(
    scenario: &Scenario,
    loc: Location,
    source: SeSource,
    exec: Execution,
) -> Result<Vec<UserLink>> {
    scenario
        .sensors
        .iter()
        .map(|s| UserLink::new(s, scenario, loc, source, exec))
        .collect()
}

pub fn task_of(sensor: &Sensor) -> Task {
    Task::new(
        sensor.data_volume,
        sensor.compute_intensity,
        sensor.output_ratio,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthPlan {
    pub total: f64,
    pub per_user: Vec<f64>,
    /// Bits/s/Hz each sensor achieves at its allocation.
    pub spectral_efficiency: Vec<f64>,
}

/// Minimum bandwidth per sensor meeting the deadline: `R_u^{-1}(D_u / T_req)`.
pub fn optimal_bandwidth(
    scenario: &Scenario,
    loc: Location,
    source: SeSource,
    exec: Execution,
) -> Result<BandwidthPlan> {
    let links = user_links(scenario, loc, source, exec)?;
    bandwidth_from_links(scenario, &links)
}

pub fn bandwidth_from_links(scenario: &Scenario, links: &[UserLink]) -> Result<BandwidthPlan> {
    let mut per_user = Vec::with_capacity(links.len());
    let mut se = Vec::with_capacity(links.len());
    for (sensor, link) in scenario.sensors.iter().zip(links) {
        let required = sensor.data_volume / scenario.latency_req;
        let b = link.inverse_rate(required)?;
        per_user.push(b);
        se.push(required / b);
    }
    Ok(BandwidthPlan {
        total: per_user.iter().sum(),
        per_user,
        spectral_efficiency: se,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackhaulCompute {
    pub backhaul_total: f64,
    pub cpu_total: f64,
    pub backhaul: Vec<f64>,
    pub cpu: Vec<f64>,
    /// Whether each sensor is processed on the hub.
    pub computes: Vec<bool>,
}

/// Threshold rule `rho / (1 - zeta) <= a2 / a3`, evaluated without division
/// so that `a3 = 0` selects compute for everyone.
pub fn prefers_compute(sensor: &Sensor, scenario: &Scenario) -> bool {
    let w = &scenario.cost;
    sensor.compute_intensity * w.compute <= w.backhaul * (1.0 - sensor.output_ratio)
}

/// Optimal backhaul and cpu totals; independent of the hub location.
pub fn optimal_backhaul_compute(scenario: &Scenario) -> BackhaulCompute {
    let t = scenario.latency_req;
    let mut out = BackhaulCompute {
        backhaul_total: 0.0,
        cpu_total: 0.0,
        backhaul: Vec::with_capacity(scenario.num_users()),
        cpu: Vec::with_capacity(scenario.num_users()),
        computes: Vec::with_capacity(scenario.num_users()),
    };
    for s in &scenario.sensors {
        let compute = prefers_compute(s, scenario);
        let rate = s.data_volume / t;
        let (rs, f) = if compute {
            (s.output_ratio * rate, s.compute_intensity * rate)
        } else {
            (rate, 0.0)
        };
        out.backhaul.push(rs);
        out.cpu.push(f);
        out.computes.push(compute);
    }
    out.backhaul_total = out.backhaul.iter().sum();
    out.cpu_total = out.cpu.iter().sum();
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalConfig {
    pub config: ResourceConfig,
    pub per_user: Vec<PerUserAllocation>,
    pub se_per_user: Vec<f64>,
    /// Whether each sensor is processed on the hub.
    pub computes: Vec<bool>,
    /// Completion time of each sensor at its allocation.
    pub latency: Vec<f64>,
}

/// Full optimal configuration and orchestration at `loc`.
pub fn full_configuration(
    scenario: &Scenario,
    loc: Location,
    source: SeSource,
    exec: Execution,
) -> Result<OptimalConfig> {
    let bw = optimal_bandwidth(scenario, loc, source, exec)?;
    let bc = optimal_backhaul_compute(scenario);
    let t_req = scenario.latency_req;

    let mut per_user = Vec::with_capacity(scenario.num_users());
    let mut latency = Vec::with_capacity(scenario.num_users());
    for (i, s) in scenario.sensors.iter().enumerate() {
        let task = task_of(s);
        let res = Resources::new(s.data_volume / t_req, bc.backhaul[i], bc.cpu[i]);
        let eta = optimal_eta(&res, &task)?;
        let outcome = latency_storage(&res, eta.eta, &task)?;
        if outcome.latency > t_req * (1.0 + 1e-9) || outcome.storage > 1e-9 * s.data_volume {
            return Err(Error::Infeasible(format!(
                "sensor {}: latency {} s, storage {} bit at the closed-form allocation",
                s.id, outcome.latency, outcome.storage
            )));
        }
        per_user.push(PerUserAllocation {
            bandwidth: bw.per_user[i],
            backhaul_rate: bc.backhaul[i],
            cpu_freq: bc.cpu[i],
            eta: eta.eta,
        });
        latency.push(outcome.latency);
    }
    let config = ResourceConfig::new(
        &scenario.cost,
        bw.total,
        bc.backhaul_total,
        bc.cpu_total,
        0.0,
    );
    Ok(OptimalConfig {
        config,
        per_user,
        se_per_user: bw.spectral_efficiency,
        computes: bc.computes,
        latency,
    })
}

/// Maps a per-user allocation meeting the deadline under the optimal split
/// to one on the balanced manifold `R_S <= R(B) <= R_S/zeta`,
/// `F = rho (R(B) - R_S) / (1 - zeta)`, never increasing any component.
pub fn normalize_solution(
    scenario: &Scenario,
    links: &[UserLink],
    input: &[PerUserAllocation],
) -> Result<Vec<PerUserAllocation>> {
    if links.len() != scenario.num_users() || input.len() != scenario.num_users() {
        return Err(Error::InvalidInput(
            "one link and allocation per sensor expected".into(),
        ));
    }
    let t_req = scenario.latency_req;
    let mut out = Vec::with_capacity(input.len());
    for ((s, link), a) in scenario.sensors.iter().zip(links).zip(input) {
        let task = task_of(s);
        if !(a.bandwidth >= 0.0 && a.backhaul_rate >= 0.0 && a.cpu_freq >= 0.0) {
            return Err(Error::Infeasible(format!(
                "sensor {}: negative allocation",
                s.id
            )));
        }
        let r = link.rate(a.bandwidth);
        if !(r > 0.0) {
            return Err(Error::Infeasible(format!("sensor {}: no bandwidth", s.id)));
        }
        let res = Resources::new(r, a.backhaul_rate, a.cpu_freq);
        if optimized_latency(&res, &task) > t_req * (1.0 + 1e-12) {
            return Err(Error::Infeasible(format!(
                "sensor {}: input misses the deadline",
                s.id
            )));
        }

        let rs = a.backhaul_rate;
        let rho = s.compute_intensity;
        let zeta = s.output_ratio;
        let c = a.cpu_freq / rho;
        let (b2, rs2, f2) = if r < rs {
            (a.bandwidth, r, 0.0)
        } else if zeta * r < rs {
            if (1.0 - zeta) * c < r - rs {
                (link.inverse_rate(rs + (1.0 - zeta) * c)?, rs, a.cpu_freq)
            } else {
                (a.bandwidth, rs, rho * (r - rs) / (1.0 - zeta))
            }
        } else if zeta * c < rs {
            (link.inverse_rate(rs + (1.0 - zeta) * c)?, rs, a.cpu_freq)
        } else {
            (link.inverse_rate(rs / zeta)?, rs, rho * rs / zeta)
        };
        let mut mapped = PerUserAllocation {
            bandwidth: b2.min(a.bandwidth),
            backhaul_rate: rs2.min(rs),
            cpu_freq: f2.min(a.cpu_freq),
            eta: 0.0,
        };
        let res2 = Resources::new(
            link.rate(mapped.bandwidth),
            mapped.backhaul_rate,
            mapped.cpu_freq,
        );
        mapped.eta = optimal_eta(&res2, &task)?.eta;
        out.push(mapped);
    }
    Ok(out)
}

/// Per-user choice made by [`lp_oracle`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpChoice {
    pub backhaul: f64,
    pub cpu: f64,
    /// Both endpoints cost the same to within `1e-12` relative.
    pub tie: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub backhaul_total: f64,
    pub cpu_total: f64,
    pub choices: Vec<LpChoice>,
}

/// Solves the backhaul/compute linear program by enumerating, per sensor,
/// both vertices of `zeta D/T <= R_S <= D/T` with the cpu implied by the
/// balance constraint, keeping the cheaper one (the lower backhaul on ties).
pub fn lp_oracle(scenario: &Scenario) -> LpSolution {
    let w = &scenario.cost;
    let t = scenario.latency_req;
    let choices: Vec<LpChoice> = scenario
        .sensors
        .iter()
        .map(|s| {
            let need = s.data_volume / t;
            let cpu_for = |rs: f64| s.compute_intensity * (need - rs) / (1.0 - s.output_ratio);
            let vertices = [s.output_ratio * need, need];
            let costs = vertices.map(|rs| w.backhaul * rs + w.compute * cpu_for(rs));
            let tie = (costs[0] - costs[1]).abs() <= 1e-12 * costs[0].abs().max(costs[1].abs());
            let pick = if tie || costs[0] < costs[1] { 0 } else { 1 };
            let rs = vertices[pick];
            LpChoice {
                backhaul: rs,
                cpu: if pick == 1 { 0.0 } else { cpu_for(rs) },
                tie,
            }
        })
        .collect();
    LpSolution {
        backhaul_total: choices.iter().map(|c| c.backhaul).sum(),
        cpu_total: choices.iter().map(|c| c.cpu).sum(),
        choices,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::generate;

    fn one(rho: f64, zeta: f64) -> Scenario {
        let mut s = generate(0, 1e7, 1).unwrap();
        s.sensors[0].data_volume = 1e7;
        s.sensors[0].compute_intensity = rho;
        s.sensors[0].output_ratio = zeta;
        s
    }

    #[test]
    fn compute_branch() {
        let bc = optimal_backhaul_compute(&one(2000.0, 0.1));
        assert!(bc.computes[0]);
        assert!((bc.backhaul_total - 1e4).abs() < 1e-9);
        assert!((bc.cpu_total - 2e8).abs() < 1e-6);
    }

    #[test]
    fn upload_branch() {
        let bc = optimal_backhaul_compute(&one(4000.0, 0.05));
        assert!(!bc.computes[0]);
        assert_eq!(bc.backhaul_total, 1e5);
        assert_eq!(bc.cpu_total, 0.0);
    }

    #[test]
    fn free_compute_always_computes() {
        let mut s = one(4900.0, 0.01);
        s.cost.compute = 0.0;
        assert!(optimal_backhaul_compute(&s).computes[0]);
    }

    #[test]
    fn unit_spectral_efficiency_bandwidth() {
        let s = one(2000.0, 0.1);
        let link = UserLink {
            id: 1,
            gamma: 1.0,
            spectral_efficiency: 1.0,
            noise_model: NoiseModel::FixedPower,
            source: SeSource::Approx,
        };
        let plan = bandwidth_from_links(&s, &[link]).unwrap();
        assert_eq!(plan.total, 1e5);
    }

    #[test]
    fn configuration_meets_deadline_without_storage() {
        let s = generate(4, 1e8, 5).unwrap();
        let cfg = full_configuration(
            &s,
            Location::ORIGIN,
            SeSource::Approx,
            Execution::Sequential,
        )
        .unwrap();
        assert_eq!(cfg.config.storage, 0.0);
        for (i, u) in s.sensors.iter().enumerate() {
            assert!((cfg.latency[i] - s.latency_req).abs() <= 1e-9 * s.latency_req);
            let a = cfg.per_user[i];
            let r = u.data_volume / s.latency_req;
            let want = (r - a.backhaul_rate) / ((1.0 - u.output_ratio) * r);
            assert!((a.eta - want).abs() < 1e-12);
            let balanced = u.compute_intensity * (r - a.backhaul_rate) / (1.0 - u.output_ratio);
            assert!((a.cpu_freq - balanced).abs() <= 1e-9 * balanced.max(1.0));
        }
        let w = s.cost;
        let manual = w.bandwidth * cfg.config.bandwidth
            + w.backhaul * cfg.config.backhaul_rate
            + w.compute * cfg.config.cpu_freq;
        assert!((cfg.config.cost - manual).abs() <= 1e-12 * manual);
    }

    #[test]
    fn psd_inverse_rate() {
        let mut s = generate(5, 1e7, 2).unwrap();
        s.noise_model = NoiseModel::Psd;
        s.noise_power = crate::units::dbm_to_watts(-174.0);
        let links = user_links(
            &s,
            Location::ORIGIN,
            SeSource::Approx,
            Execution::Sequential,
        )
        .unwrap();
        for l in &links {
            let b = l.inverse_rate(2e5).unwrap();
            assert!((l.rate(b) - 2e5).abs() < 1e-6);
        }
        assert!(user_links(
            &s,
            Location::ORIGIN,
            SeSource::MonteCarlo {
                samples: 10,
                seed: 0
            },
            Execution::Sequential
        )
        .is_err());
    }

    #[test]
    fn normalize_fixed_point() {
        let s = generate(6, 1e8, 5).unwrap();
        let cfg = full_configuration(
            &s,
            Location::ORIGIN,
            SeSource::Approx,
            Execution::Sequential,
        )
        .unwrap();
        let links = user_links(
            &s,
            Location::ORIGIN,
            SeSource::Approx,
            Execution::Sequential,
        )
        .unwrap();
        let out = normalize_solution(&s, &links, &cfg.per_user).unwrap();
        for (a, b) in cfg.per_user.iter().zip(&out) {
            assert!((a.bandwidth - b.bandwidth).abs() <= 1e-12 * a.bandwidth);
            assert_eq!(a.backhaul_rate, b.backhaul_rate);
            assert!((a.cpu_freq - b.cpu_freq).abs() <= 1e-9 * a.cpu_freq.max(1.0));
        }
    }

    #[test]
    fn normalize_link_bound_row() {
        let s = one(2000.0, 0.1);
        let links = user_links(
            &s,
            Location::new(s.sensors[0].x, s.sensors[0].y),
            SeSource::Approx,
            Execution::Sequential,
        )
        .unwrap();
        let b = links[0].inverse_rate(2e5).unwrap();
        let input = [PerUserAllocation {
            bandwidth: b,
            backhaul_rate: 3e5,
            cpu_freq: 1e8,
            eta: 0.0,
        }];
        let out = normalize_solution(&s, &links, &input).unwrap();
        assert!((out[0].backhaul_rate - 2e5).abs() < 1e-6);
        assert_eq!(out[0].cpu_freq, 0.0);
        assert_eq!(out[0].bandwidth, b);
    }

    #[test]
    fn lp_oracle_tie_and_zero_backhaul_weight() {
        // rho/(1-zeta) = 2000/0.8 = 2500 = a2/a3
        let mut s = one(2000.0, 0.2);
        s.cost.backhaul = 2.5e-6;
        let lp = lp_oracle(&s);
        assert!(lp.choices[0].tie);
        let bc = optimal_backhaul_compute(&s);
        let cost = |rs: f64, f: f64| s.cost.backhaul * rs + s.cost.compute * f;
        let (a, b) = (
            cost(bc.backhaul_total, bc.cpu_total),
            cost(lp.backhaul_total, lp.cpu_total),
        );
        assert!((a - b).abs() <= 1e-12 * a);

        s.cost.backhaul = 0.0;
        let lp = lp_oracle(&s);
        assert_eq!(lp.backhaul_total, 1e5);
        assert!(!optimal_backhaul_compute(&s).computes[0]);
    }
}
