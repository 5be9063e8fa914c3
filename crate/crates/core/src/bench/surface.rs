//! Completion-time surfaces and cost curves around the optimal configuration.

use crate::channel::SeSource;
use crate::config_opt::{full_configuration, task_of, user_links, OptimalConfig, UserLink};
use crate::dataflow::Resources;
use crate::scenario::{Location, Scenario};
use crate::scheduling::optimized_latency;
use crate::{Error, Execution, Result};

/// Worst completion time over sensors for each `(R^S_total, F_total)` node.
#[derive(Debug, Clone, PartialEq)]
pub struct LatencySurface {
    pub bandwidth_total: f64,
    pub rs_grid: Vec<f64>,
    pub f_grid: Vec<f64>,
    /// `latency[i_rs * f_grid.len() + i_f]`, seconds.
    pub latency: Vec<f64>,
    pub latency_req: f64,
}

impl LatencySurface {
    pub fn at(&self, i_rs: usize, i_f: usize) -> f64 {
        self.latency[i_rs * self.f_grid.len() + i_f]
    }

    pub fn feasible(&self, i_rs: usize, i_f: usize) -> bool {
        self.at(i_rs, i_f) <= self.latency_req * (1.0 + 1e-9)
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "rs_total_bps,f_total_hz,latency_s,feasible")?;
        for (i, rs) in self.rs_grid.iter().enumerate() {
            for (j, f) in self.f_grid.iter().enumerate() {
                writeln!(
                    w,
                    "{rs},{f},{},{}",
                    self.at(i, j),
                    u8::from(self.feasible(i, j))
                )?;
            }
        }
        Ok(())
    }
}

/// Per-sensor shares used to split totals: each sensor's part of the
/// standalone optimum. Compute falls back to `rho D` shares when the optimum
/// uses no compute at all.
fn shares(opt: &OptimalConfig, scenario: &Scenario) -> [Vec<f64>; 3] {
    let norm = |v: Vec<f64>| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect::<Vec<_>>()
    };
    let b = norm(opt.per_user.iter().map(|a| a.bandwidth).collect());
    let rs = norm(opt.per_user.iter().map(|a| a.backhaul_rate).collect());
    let f_opt: Vec<f64> = opt.per_user.iter().map(|a| a.cpu_freq).collect();
    let f = if f_opt.iter().sum::<f64>() > 0.0 {
        norm(f_opt)
    } else {
        norm(
            scenario
                .sensors
                .iter()
                .map(|s| s.compute_intensity * s.data_volume)
                .collect(),
        )
    };
    [b, rs, f]
}

/// Completion time of the slowest sensor when the totals are split in
/// proportion to the standalone optimum and every sensor then uses its
/// optimal compute/upload split.
pub fn latency_surface(
    scenario: &Scenario,
    loc: Location,
    bandwidth_total: f64,
    rs_grid: &[f64],
    f_grid: &[f64],
    exec: Execution,
) -> Result<LatencySurface> {
    if rs_grid.is_empty() || f_grid.is_empty() {
        return Err(Error::InvalidInput("surface grids must be nonempty".into()));
    }
    let opt = full_configuration(scenario, loc, SeSource::Approx, Execution::Sequential)?;
    let links = user_links(scenario, loc, SeSource::Approx, Execution::Sequential)?;
    let [b_share, rs_share, f_share] = shares(&opt, scenario);
    let rates: Vec<f64> = links
        .iter()
        .zip(&b_share)
        .map(|(l, s)| l.rate(bandwidth_total * s))
        .collect();
    let rows = exec.map_slice(rs_grid, |&rs| {
        f_grid
            .iter()
            .map(|&f| {
                scenario
                    .sensors
                    .iter()
                    .enumerate()
                    .map(|(u, s)| {
                        let res = Resources::new(rates[u], rs * rs_share[u], f * f_share[u]);
                        optimized_latency(&res, &task_of(s))
                    })
                    .fold(0.0, f64::max)
            })
            .collect::<Vec<_>>()
    });
    Ok(LatencySurface {
        bandwidth_total,
        rs_grid: rs_grid.to_vec(),
        f_grid: f_grid.to_vec(),
        latency: rows.into_iter().flatten().collect(),
        latency_req: scenario.latency_req,
    })
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sweep {
    /// Sweep the compute total, search the smallest feasible backhaul.
    Cpu,
    /// Sweep the backhaul total, search the smallest feasible compute.
    Backhaul,
}

impl Sweep {
    pub fn name(self) -> &'static str {
        match self {
            Sweep::Cpu => "f_total",
            Sweep::Backhaul => "rs_total",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub rs_total: f64,
    pub f_total: f64,
    /// `+inf` where no value of the other resource makes the deadline.
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostCurve {
    pub sweep: Sweep,
    pub bandwidth_total: f64,
    pub points: Vec<CurvePoint>,
    /// Index of the first minimum.
    pub argmin: usize,
    pub optimum_rs: f64,
    pub optimum_f: f64,
    pub optimum_cost: f64,
}

impl CostCurve {
    /// Whether the closed-form optimum lies within one grid step of the
    /// curve minimum and no curve point beats it.
    pub fn optimum_attained(&self) -> bool {
        let swept = |p: &CurvePoint| match self.sweep {
            Sweep::Cpu => p.f_total,
            Sweep::Backhaul => p.rs_total,
        };
        let target = match self.sweep {
            Sweep::Cpu => self.optimum_f,
            Sweep::Backhaul => self.optimum_rs,
        };
        let step = if self.points.len() > 1 {
            (swept(&self.points[1]) - swept(&self.points[0])).abs()
        } else {
            0.0
        };
        let best = &self.points[self.argmin];
        (swept(best) - target).abs() <= step * (1.0 + 1e-9)
            && best.cost >= self.optimum_cost * (1.0 - 1e-9)
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "rs_total_bps,f_total_hz,cost,is_min")?;
        for (i, p) in self.points.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{}",
                p.rs_total,
                p.f_total,
                p.cost,
                u8::from(i == self.argmin)
            )?;
        }
        Ok(())
    }
}

/// Feasibility of backhaul / compute totals with the bandwidth fixed at the
/// optimum, under the best split of the totals among sensors: every sensor
/// first gets `zeta D / T` backhaul, the remainder goes to the sensors that
/// save the most compute per unit of backhaul (largest `rho / (1 - zeta)`),
/// and compute then covers what the backhaul leaves.
struct SplitOracle<'a> {
    scenario: &'a Scenario,
    rates: Vec<f64>,
    need: Vec<f64>,
    order: Vec<usize>,
}

impl<'a> SplitOracle<'a> {
    fn new(scenario: &'a Scenario, links: &[UserLink], bandwidth: &[f64]) -> Self {
        let t = scenario.latency_req;
        let mut order: Vec<usize> = (0..scenario.num_users()).collect();
        let key = |u: usize| {
            let s = &scenario.sensors[u];
            s.compute_intensity / (1.0 - s.output_ratio)
        };
        order.sort_by(|&i, &j| key(j).total_cmp(&key(i)).then(i.cmp(&j)));
        Self {
            scenario,
            rates: links
                .iter()
                .zip(bandwidth)
                .map(|(l, b)| l.rate(*b))
                .collect(),
            need: scenario.sensors.iter().map(|s| s.data_volume / t).collect(),
            order,
        }
    }

    fn split(&self, rs_total: f64, f_total: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        let s = &self.scenario.sensors;
        let mut rs: Vec<f64> = s
            .iter()
            .zip(&self.need)
            .map(|(u, d)| u.output_ratio * d)
            .collect();
        let mut left = rs_total - rs.iter().sum::<f64>();
        if left < -1e-12 * rs_total {
            return None;
        }
        for &u in &self.order {
            let add = left.clamp(0.0, self.need[u] - rs[u]);
            rs[u] += add;
            left -= add;
        }
        let mut f: Vec<f64> = (0..s.len())
            .map(|u| {
                s[u].compute_intensity * (self.need[u] - rs[u]).max(0.0) / (1.0 - s[u].output_ratio)
            })
            .collect();
        let used: f64 = f.iter().sum();
        if used > 0.0 {
            let scale = f_total / used;
            f.iter_mut().for_each(|x| *x *= scale);
        }
        Some((rs, f))
    }

    fn feasible(&self, rs_total: f64, f_total: f64) -> bool {
        let Some((rs, f)) = self.split(rs_total, f_total) else {
            return false;
        };
        let t = self.scenario.latency_req;
        self.scenario.sensors.iter().enumerate().all(|(u, s)| {
            let res = Resources::new(self.rates[u], rs[u], f[u]);
            optimized_latency(&res, &task_of(s)) <= t * (1.0 + 1e-12)
        })
    }

    /// Smallest value of one resource making the other feasible, by
    /// bisection on `[lo, hi]`; `None` when even `hi` fails.
    fn min_feasible(&self, lo: f64, hi: f64, check: impl Fn(f64) -> bool) -> Option<f64> {
        if check(lo) {
            return Some(lo);
        }
        if !check(hi) {
            return None;
        }
        let (mut lo, mut hi) = (lo, hi);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if check(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-14 * hi {
                break;
            }
        }
        Some(hi)
    }
}

/// Total cost along a sweep of one resource, the other set to its smallest
/// feasible value by bisection and the bandwidth fixed at the optimum.
pub fn cost_curve_with_oracle(
    scenario: &Scenario,
    loc: Location,
    sweep: Sweep,
    grid: &[f64],
) -> Result<CostCurve> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("sweep grid must be nonempty".into()));
    }
    let opt = full_configuration(scenario, loc, SeSource::Approx, Execution::Sequential)?;
    let links = user_links(scenario, loc, SeSource::Approx, Execution::Sequential)?;
    let bw: Vec<f64> = opt.per_user.iter().map(|a| a.bandwidth).collect();
    let oracle = SplitOracle::new(scenario, &links, &bw);
    let need_total: f64 = oracle.need.iter().sum();
    let f_max: f64 = scenario
        .sensors
        .iter()
        .zip(&oracle.need)
        .map(|(s, d)| s.compute_intensity * d / (1.0 - s.output_ratio))
        .sum();
    let w = &scenario.cost;
    let b_total = opt.config.bandwidth;
    let points: Vec<CurvePoint> = grid
        .iter()
        .map(|&v| {
            let (rs, f) = match sweep {
                Sweep::Cpu => (
                    oracle.min_feasible(0.0, need_total, |r| oracle.feasible(r, v)),
                    Some(v),
                ),
                Sweep::Backhaul => (
                    Some(v),
                    oracle.min_feasible(0.0, f_max, |f| oracle.feasible(v, f)),
                ),
            };
            match (rs, f) {
                (Some(rs), Some(f)) => CurvePoint {
                    rs_total: rs,
                    f_total: f,
                    cost: w.cost(b_total, rs, f, 0.0),
                },
                _ => CurvePoint {
                    rs_total: rs.unwrap_or(v),
                    f_total: f.unwrap_or(v),
                    cost: f64::INFINITY,
                },
            }
        })
        .collect();
    let mut argmin = 0;
    for (i, p) in points.iter().enumerate() {
        if p.cost < points[argmin].cost {
            argmin = i;
        }
    }
    Ok(CostCurve {
        sweep,
        bandwidth_total: b_total,
        points,
        argmin,
        optimum_rs: opt.config.backhaul_rate,
        optimum_f: opt.config.cpu_freq,
        optimum_cost: opt.config.three_weight_cost(w),
    })
}
