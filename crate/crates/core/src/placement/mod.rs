//! Horizontal placement of the hub.
//!
//! Only the bandwidth term of the optimal cost depends on the location; the
//! backhaul and compute totals are fixed by the scenario. [`sca_optimize`]
//! minimizes it by successive convex approximation, [`grid_search`] by brute
//! force.

pub mod barrier;
pub mod subproblem;

use std::io::Write;
use std::path::Path;

use crate::channel::{channel_state, spectral_efficiency_approx, SeSource};
use crate::config_opt::{optimal_backhaul_compute, optimal_bandwidth};
use crate::scenario::{Location, NoiseModel, Scenario};
use crate::{Error, Execution, Result};

pub use subproblem::{
    solve_subproblem, ConstraintAudit, Family, ScaIterate, Subproblem, SubproblemSolution,
};

/// Optimal cost at a location, split into its location-dependent bandwidth
/// part and the fixed remainder.
#[derive(Debug, Clone)]
pub struct CostModel<'a> {
    scenario: &'a Scenario,
    fixed: f64,
}

impl<'a> CostModel<'a> {
    pub fn new(scenario: &'a Scenario) -> Self {
        let bc = optimal_backhaul_compute(scenario);
        let fixed = scenario
            .cost
            .cost(0.0, bc.backhaul_total, bc.cpu_total, 0.0);
        Self { scenario, fixed }
    }

    /// Backhaul and compute cost, independent of the location.
    pub fn fixed_cost(&self) -> f64 {
        self.fixed
    }

    /// Total minimum bandwidth at `loc`, Hz; infinite if some sensor cannot
    /// be served.
    pub fn total_bandwidth(&self, loc: Location) -> f64 {
        let s = self.scenario;
        match s.noise_model {
            NoiseModel::FixedPower => s
                .sensors
                .iter()
                .map(|u| {
                    let gamma = channel_state(loc, u, s).mean_snr;
                    match spectral_efficiency_approx(gamma) {
                        Ok(a) if a.spectral_efficiency > 0.0 => {
                            u.data_volume / (s.latency_req * a.spectral_efficiency)
                        }
                        _ => f64::INFINITY,
                    }
                })
                .sum(),
            NoiseModel::Psd => optimal_bandwidth(s, loc, SeSource::Approx, Execution::Sequential)
                .map(|p| p.total)
                .unwrap_or(f64::INFINITY),
        }
    }

    pub fn cost(&self, loc: Location) -> f64 {
        self.scenario.cost.bandwidth * self.total_bandwidth(loc) + self.fixed
    }
}

/// `a1 sum B_u + a2 R^S_total + a3 F_total` at `loc` under the optimal
/// configuration.
pub fn direct_cost(loc: Location, scenario: &Scenario) -> f64 {
    CostModel::new(scenario).cost(loc)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Baselines {
    pub geometric_center: Location,
    /// Mean sensor position weighted by data volume.
    pub weighted_centroid: Location,
}

pub fn baselines(scenario: &Scenario) -> Result<Baselines> {
    if scenario.sensors.is_empty() {
        return Err(Error::InvalidInput("no sensors".into()));
    }
    let n = scenario.num_users() as f64;
    let (mut gx, mut gy, mut wx, mut wy, mut w) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for s in &scenario.sensors {
        gx += s.x;
        gy += s.y;
        wx += s.data_volume * s.x;
        wy += s.data_volume * s.y;
        w += s.data_volume;
    }
    Ok(Baselines {
        geometric_center: Location::new(gx / n, gy / n),
        weighted_centroid: Location::new(wx / w, wy / w),
    })
}

/// Axis-aligned search rectangle, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Bounds {
    pub fn square(half_width: f64) -> Self {
        Self {
            x_min: -half_width,
            x_max: half_width,
            y_min: -half_width,
            y_max: half_width,
        }
    }

    fn axis(lo: f64, hi: f64, res: f64) -> Vec<f64> {
        let n = ((hi - lo) / res * (1.0 + 1e-12)).floor() as usize;
        (0..=n).map(|i| lo + i as f64 * res).collect()
    }
}

impl Default for Bounds {
    fn default() -> Self {
        Self::square(1000.0)
    }
}

/// Cost at every node of a grid, row-major with `y` outer and `x` inner.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSurface {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// `cost[iy * xs.len() + ix]`.
    pub cost: Vec<f64>,
}

impl CostSurface {
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.cost[iy * self.xs.len() + ix]
    }

    /// First node attaining the minimum in row-major order.
    pub fn argmin(&self) -> (Location, f64) {
        let mut best = 0;
        for (i, &c) in self.cost.iter().enumerate() {
            if c < self.cost[best] {
                best = i;
            }
        }
        let nx = self.xs.len();
        (
            Location::new(self.xs[best % nx], self.ys[best / nx]),
            self.cost[best],
        )
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,y,cost")?;
        for (iy, y) in self.ys.iter().enumerate() {
            for (ix, x) in self.xs.iter().enumerate() {
                writeln!(w, "{x},{y},{}", self.at(ix, iy))?;
            }
        }
        Ok(())
    }
}

pub fn cost_surface(
    scenario: &Scenario,
    bounds: Bounds,
    resolution: f64,
    exec: Execution,
) -> Result<CostSurface> {
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "grid resolution must be positive, got {resolution}"
        )));
    }
    if !(bounds.x_min <= bounds.x_max && bounds.y_min <= bounds.y_max)
        || ![bounds.x_min, bounds.x_max, bounds.y_min, bounds.y_max]
            .iter()
            .all(|v| v.is_finite())
    {
        return Err(Error::InvalidInput(format!(
            "empty search bounds {bounds:?}"
        )));
    }
    let xs = Bounds::axis(bounds.x_min, bounds.x_max, resolution);
    let ys = Bounds::axis(bounds.y_min, bounds.y_max, resolution);
    let model = CostModel::new(scenario);
    let rows = exec.map_slice(&ys, |&y| {
        xs.iter()
            .map(|&x| model.cost(Location::new(x, y)))
            .collect::<Vec<_>>()
    });
    Ok(CostSurface {
        xs,
        ys,
        cost: rows.into_iter().flatten().collect(),
    })
}

/// One accepted iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub iter: usize,
    pub location: Location,
    /// Hz.
    pub sum_bandwidth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacementResult {
    pub location: Location,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<TraceEntry>,
    /// Constraint values of the last subproblem's solution, and of its
    /// interior-point minimizer before tightening.
    pub activity: Option<ConstraintAudit>,
    pub interior_activity: Option<ConstraintAudit>,
    /// Stationarity residual of the last subproblem solve.
    pub kkt_residual: Option<f64>,
}

impl PlacementResult {
    pub fn write_trace_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "iter,h_x,h_y,sum_bandwidth_hz")?;
        for t in &self.trace {
            writeln!(
                w,
                "{},{},{},{}",
                t.iter, t.location.x, t.location.y, t.sum_bandwidth
            )?;
        }
        Ok(())
    }
}

pub fn grid_search(
    scenario: &Scenario,
    bounds: Bounds,
    resolution: f64,
    exec: Execution,
) -> Result<PlacementResult> {
    let surface = cost_surface(scenario, bounds, resolution, exec)?;
    let (location, cost) = surface.argmin();
    Ok(PlacementResult {
        location,
        cost,
        iterations: 0,
        converged: true,
        trace: Vec::new(),
        activity: None,
        interior_activity: None,
        kkt_residual: None,
    })
}

pub const DEFAULT_EPS: f64 = 1e-4;
pub const DEFAULT_MAX_ITER: usize = 100;
const MAX_HALVINGS: usize = 20;

/// Successive convex approximation from the geometric center of the
/// sensors. Each round solves the convexified subproblem at the current
/// point, moves to its location (halving the step while the true cost
/// rises) and rebuilds the tight slack variables there. Stops when the
/// relative change of the total bandwidth drops below `eps`.
pub fn sca_optimize(scenario: &Scenario, eps: f64, max_iter: usize) -> Result<PlacementResult> {
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!(
            "tolerance must be positive, got {eps}"
        )));
    }
    subproblem::ensure_fixed_noise(scenario)?;
    let model = CostModel::new(scenario);
    let mut loc = baselines(scenario)?.geometric_center;
    let mut point = ScaIterate::at_location(scenario, loc)?;
    let mut cost = model.cost(loc);
    let mut result = PlacementResult {
        location: loc,
        cost,
        iterations: 0,
        converged: false,
        trace: vec![TraceEntry {
            iter: 0,
            location: loc,
            sum_bandwidth: point.sum_bandwidth(),
        }],
        activity: None,
        interior_activity: None,
        kkt_residual: None,
    };

    for k in 1..=max_iter {
        let sol = solve_subproblem(&point, scenario)?;
        let mut cand = sol.point.location;
        let mut cand_cost = model.cost(cand);
        for _ in 0..MAX_HALVINGS {
            if cand_cost <= cost {
                break;
            }
            cand = Location::new(0.5 * (loc.x + cand.x), 0.5 * (loc.y + cand.y));
            cand_cost = model.cost(cand);
        }
        if !(cand_cost <= cost) {
            cand = loc;
            cand_cost = cost;
        }
        let next = ScaIterate::at_location(scenario, cand)?;

        let previous = point.sum_bandwidth();
        let current = next.sum_bandwidth();
        loc = cand;
        cost = cand_cost;
        point = next;
        result.iterations = k;
        result.activity = Some(sol.audit);
        result.interior_activity = Some(sol.interior_activity);
        result.kkt_residual = Some(sol.kkt_residual);
        result.trace.push(TraceEntry {
            iter: k,
            location: loc,
            sum_bandwidth: current,
        });
        if ((current - previous) / previous).abs() < eps {
            result.converged = true;
            break;
        }
    }
    result.location = loc;
    result.cost = cost;
    if result.converged {
        Ok(result)
    } else {
        Err(Error::NotConverged(Box::new(result)))
    }
}

pub fn write_csv_file(
    path: &Path,
    f: impl FnOnce(&mut std::io::BufWriter<std::fs::File>) -> std::io::Result<()>,
) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    f(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config_opt::full_configuration;
    use crate::scenario::{generate, Sensor};

    fn sensor(id: u32, x: f64, y: f64, d: f64) -> Sensor {
        Sensor {
            id,
            x,
            y,
            data_volume: d,
            compute_intensity: 2000.0,
            output_ratio: 0.05,
            tx_power: 1.0,
        }
    }

    #[test]
    fn direct_cost_matches_configuration_chain() {
        for seed in 0..5 {
            let s = generate(seed, 1e8, 5).unwrap();
            let loc = Location::new(120.0, -340.0);
            let full =
                full_configuration(&s, loc, SeSource::Approx, Execution::Sequential).unwrap();
            let direct = direct_cost(loc, &s);
            assert!((direct - full.config.three_weight_cost(&s.cost)).abs() <= 1e-10 * direct);
        }
    }

    #[test]
    fn single_sensor_grid_hits_sensor() {
        let s = Scenario::with_defaults(vec![sensor(1, 230.0, -120.0, 5e7)]);
        let b = Bounds {
            x_min: 130.0,
            x_max: 330.0,
            y_min: -220.0,
            y_max: -20.0,
        };
        let r = grid_search(&s, b, 10.0, Execution::Parallel).unwrap();
        assert_eq!(r.location, Location::new(230.0, -120.0));
    }

    #[test]
    fn refining_grid_does_not_hurt() {
        let s = generate(4, 1e8, 5).unwrap();
        let coarse = grid_search(&s, Bounds::default(), 100.0, Execution::Parallel).unwrap();
        let fine = grid_search(&s, Bounds::default(), 50.0, Execution::Parallel).unwrap();
        assert!(fine.cost <= coarse.cost);
    }

    #[test]
    fn grid_rejects_bad_input() {
        let s = generate(4, 1e8, 5).unwrap();
        assert!(grid_search(&s, Bounds::default(), 0.0, Execution::Sequential).is_err());
        let empty = Bounds {
            x_min: 1.0,
            x_max: 0.0,
            y_min: 0.0,
            y_max: 1.0,
        };
        assert!(grid_search(&s, empty, 10.0, Execution::Sequential).is_err());
    }

    #[test]
    fn sequential_and_parallel_surfaces_agree() {
        let s = generate(9, 1e8, 5).unwrap();
        let a = cost_surface(&s, Bounds::default(), 100.0, Execution::Sequential).unwrap();
        let b = cost_surface(&s, Bounds::default(), 100.0, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn baselines_basic() {
        let same =
            Scenario::with_defaults(vec![sensor(1, 0.0, 0.0, 1e7), sensor(2, 100.0, 50.0, 1e7)]);
        let b = baselines(&same).unwrap();
        assert_eq!(b.geometric_center, b.weighted_centroid);
        let heavy =
            Scenario::with_defaults(vec![sensor(1, 0.0, 0.0, 1e9), sensor(2, 100.0, 0.0, 1e6)]);
        let b = baselines(&heavy).unwrap();
        assert!(b.weighted_centroid.x < b.geometric_center.x);
    }

    #[test]
    fn single_sensor_sca() {
        let s = Scenario::with_defaults(vec![sensor(1, 400.0, -250.0, 5e7)]);
        let r = sca_optimize(&s, DEFAULT_EPS, DEFAULT_MAX_ITER).unwrap();
        assert!(
            (r.location.x - 400.0).abs() < 1.0 && (r.location.y + 250.0).abs() < 1.0,
            "{:?}",
            r.location
        );
    }

    #[test]
    fn sca_trace_is_monotone() {
        let s = generate(21, 1e8, 5).unwrap();
        let r = sca_optimize(&s, DEFAULT_EPS, DEFAULT_MAX_ITER).unwrap();
        for w in r.trace.windows(2) {
            assert!(w[1].sum_bandwidth <= w[0].sum_bandwidth * (1.0 + 1e-7));
        }
        assert!((r.cost - direct_cost(r.location, &s)).abs() <= 1e-9 * r.cost);
    }

    #[test]
    fn two_sensor_symmetry() {
        let s = Scenario::with_defaults(vec![
            sensor(1, -300.0, 0.0, 4e7),
            sensor(2, 300.0, 0.0, 4e7),
        ]);
        let l = direct_cost(Location::new(-50.0, 80.0), &s);
        let r = direct_cost(Location::new(50.0, 80.0), &s);
        assert!((l - r).abs() <= 1e-12 * l);
        let h = 1e-3;
        let g = direct_cost(Location::new(h, 0.0), &s) - direct_cost(Location::new(-h, 0.0), &s);
        assert!(g.abs() <= 1e-9 * l);
    }
}
