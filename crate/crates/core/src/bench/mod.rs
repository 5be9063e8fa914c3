//! Comparison schemes and reproducible experiments.
//!
//! Experiments:
//!
//! | id                | content                                                           |
//! |-------------------|-------------------------------------------------------------------|
//! | `dmax_sweep`      | cost of the proposed, sequential and equal-share schemes vs `D_max` |
//! | `feasible_region` | worst-sensor completion time over (backhaul, compute) totals      |
//! | `latency_cut`     | completion time along the backhaul axis at a fixed compute total  |
//! | `cost_curves`     | total cost along compute and backhaul sweeps                      |
//! | `placement_audit` | placement cost surface with SCA, grid and heuristic locations     |

mod schemes;
mod surface;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub use schemes::{
    scheme1_config, scheme2_config, sequential_at_eta, sequential_latency, sequential_user,
    SequentialAllocation, SEQUENTIAL_ETA_STEP,
};
pub use surface::{
    cost_curve_with_oracle, latency_surface, linspace, CostCurve, CurvePoint, LatencySurface, Sweep,
};

use crate::channel::SeSource;
use crate::config_opt::full_configuration;
use crate::placement::{
    baselines, cost_surface, direct_cost, sca_optimize, Bounds, DEFAULT_EPS, DEFAULT_MAX_ITER,
};
use crate::scenario::{generate, Location, Scenario};
use crate::{Error, Execution, Result};

pub const EXPERIMENTS: [&str; 5] = [
    "dmax_sweep",
    "feasible_region",
    "latency_cut",
    "cost_curves",
    "placement_audit",
];

/// Sensors per generated topology.
pub const DEFAULT_USERS: usize = 5;

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    linspace(a, b, n)
        .into_iter()
        .map(|e| 10f64.powf(e))
        .collect()
}

#[derive(Debug, Clone)]
pub struct ExperimentParams {
    /// Where CSV artifacts go; nothing is written when `None`.
    pub out_dir: Option<PathBuf>,
    pub exec: Execution,
    pub n_users: usize,
    /// Largest data volume of generated topologies, bits (all but `dmax_sweep`).
    pub dmax: f64,
    /// Replaces the generated topology of `feasible_region`..`cost_curves` when given.
    pub scenario: Option<Scenario>,
    /// Grid resolution of `placement_audit`, meters.
    pub grid_res: f64,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        Self {
            out_dir: None,
            exec: Execution::Parallel,
            n_users: DEFAULT_USERS,
            dmax: 1e8,
            scenario: None,
            grid_res: 10.0,
        }
    }
}

/// One experiment's records as a table plus seed-averaged summary values.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub id: String,
    pub seeds: Vec<u64>,
    pub columns: Vec<String>,
    pub records: Vec<Vec<f64>>,
    pub summary: Vec<(String, f64)>,
    /// Files written, in creation order.
    pub artifacts: Vec<PathBuf>,
}

impl ExperimentReport {
    fn new(id: &str, seeds: &[u64], columns: &[&str]) -> Self {
        Self {
            id: id.to_string(),
            seeds: seeds.to_vec(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            records: Vec::new(),
            summary: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn records_csv(&self) -> String {
        table_csv(&self.columns, &self.records)
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from("key,value\n");
        for (k, v) in &self.summary {
            let _ = writeln!(s, "{k},{v}");
        }
        s
    }

    pub fn summary_value(&self, key: &str) -> Option<f64> {
        self.summary.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }
}

fn table_csv(columns: &[String], rows: &[Vec<f64>]) -> String {
    let mut s = columns.join(",");
    s.push('\n');
    for r in rows {
        let line: Vec<String> = r.iter().map(|v| v.to_string()).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    sum / n as f64
}

struct Artifacts<'a> {
    dir: Option<&'a Path>,
    written: Vec<PathBuf>,
}

impl Artifacts<'_> {
    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        if let Some(dir) = self.dir {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let path = dir.join(name);
            std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
            self.written.push(path);
        }
        Ok(())
    }
}

/// Runs one experiment over `seeds`. Every record depends only on the
/// experiment id, the seed and `params`, so reruns are byte-identical.
pub fn run_experiment(
    id: &str,
    seeds: &[u64],
    params: &ExperimentParams,
) -> Result<ExperimentReport> {
    if seeds.is_empty() {
        return Err(Error::InvalidInput("at least one seed is required".into()));
    }
    let mut files = Artifacts {
        dir: params.out_dir.as_deref(),
        written: Vec::new(),
    };
    let mut report = match id {
        "dmax_sweep" => dmax_sweep(seeds, params)?,
        "feasible_region" => feasible_region(seeds, params, &mut files)?,
        "latency_cut" => latency_cut(seeds, params, &mut files)?,
        "cost_curves" => cost_curves(seeds, params, &mut files)?,
        "placement_audit" => placement_audit(seeds, params, &mut files)?,
        other => return Err(Error::UnknownExperiment(other.to_string())),
    };
    files.write(&format!("{id}.csv"), &report.records_csv())?;
    files.write(&format!("{id}_summary.csv"), &report.summary_csv())?;
    report.artifacts = files.written;
    Ok(report)
}

pub const FIG3_DMAX_POINTS: usize = 10;

fn dmax_sweep(seeds: &[u64], params: &ExperimentParams) -> Result<ExperimentReport> {
    let dmax = logspace(1e6, 1e8, FIG3_DMAX_POINTS);
    let mut report = ExperimentReport::new(
        "dmax_sweep",
        seeds,
        &["seed", "dmax_bits", "proposed", "scheme1", "scheme2"],
    );
    let jobs: Vec<(u64, f64)> = seeds
        .iter()
        .flat_map(|&s| dmax.iter().map(move |&d| (s, d)))
        .collect();
    let rows = params
        .exec
        .map_slice(&jobs, |&(seed, d)| -> Result<Vec<f64>> {
            let s = generate(seed, d, params.n_users)?;
            let w = &s.cost;
            let p = full_configuration(
                &s,
                Location::ORIGIN,
                SeSource::Approx,
                Execution::Sequential,
            )?;
            let c1 = scheme1_config(&s, Location::ORIGIN)?;
            let c2 = scheme2_config(&s, Location::ORIGIN)?;
            Ok(vec![
                seed as f64,
                d,
                p.config.three_weight_cost(w),
                c1.config.three_weight_cost(w),
                c2.config.three_weight_cost(w),
            ])
        });
    report.records = rows.into_iter().collect::<Result<_>>()?;

    for &d in &dmax {
        let at: Vec<&Vec<f64>> = report.records.iter().filter(|r| r[1] == d).collect();
        let key = format!("{d:e}");
        report.summary.push((
            format!("mean_proposed@{key}"),
            mean(at.iter().map(|r| r[2])),
        ));
        report
            .summary
            .push((format!("mean_scheme1@{key}"), mean(at.iter().map(|r| r[3]))));
        report
            .summary
            .push((format!("mean_scheme2@{key}"), mean(at.iter().map(|r| r[4]))));
    }
    let red1 = mean(report.records.iter().map(|r| 1.0 - r[2] / r[3]));
    let red2 = mean(report.records.iter().map(|r| 1.0 - r[2] / r[4]));
    report
        .summary
        .push(("mean_reduction_vs_scheme1".into(), red1));
    report
        .summary
        .push(("mean_reduction_vs_scheme2".into(), red2));
    let dominated = report
        .records
        .iter()
        .all(|r| r[2] <= r[4] * (1.0 + 1e-9) && r[2] <= r[3] * (1.0 + 1e-9));
    report.summary.push((
        "proposed_dominates_all".into(),
        f64::from(u8::from(dominated)),
    ));
    Ok(report)
}

fn topology(seed: u64, params: &ExperimentParams) -> Result<Scenario> {
    match &params.scenario {
        Some(s) => Ok(s.clone()),
        None => generate(seed, params.dmax, params.n_users),
    }
}

/// Bandwidth multiples of the optimum used for the surfaces.
pub const SURFACE_BANDWIDTH_RATIOS: [f64; 4] = [0.44, 0.74, 1.0, 1.78];
pub const SURFACE_POINTS: usize = 100;
/// Compute total of the fixed-compute latency cut, cycles/s.
pub const FIXED_CPU_TOTAL: f64 = 4.5e9;

fn feasible_region(
    seeds: &[u64],
    params: &ExperimentParams,
    files: &mut Artifacts,
) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new(
        "feasible_region",
        seeds,
        &["seed", "bandwidth_ratio", "feasible_nodes", "min_latency_s"],
    );
    for &seed in seeds {
        let s = topology(seed, params)?;
        let opt = full_configuration(
            &s,
            Location::ORIGIN,
            SeSource::Approx,
            Execution::Sequential,
        )?;
        let rs = linspace(0.0, 2.0 * opt.config.backhaul_rate, SURFACE_POINTS);
        let f = linspace(
            0.0,
            2.0 * opt.config.cpu_freq.max(FIXED_CPU_TOTAL / 2.0),
            SURFACE_POINTS,
        );
        for ratio in SURFACE_BANDWIDTH_RATIOS {
            let surf = latency_surface(
                &s,
                Location::ORIGIN,
                ratio * opt.config.bandwidth,
                &rs,
                &f,
                params.exec,
            )?;
            let feasible = (0..rs.len())
                .flat_map(|i| (0..f.len()).map(move |j| (i, j)))
                .filter(|&(i, j)| surf.feasible(i, j))
                .count();
            let min = surf.latency.iter().copied().fold(f64::INFINITY, f64::min);
            report
                .records
                .push(vec![seed as f64, ratio, feasible as f64, min]);
            let mut csv = Vec::new();
            surf.write_csv(&mut csv)
                .map_err(|e| Error::io("<memory>", e))?;
            files.write(
                &format!("feasible_region_seed{seed}_b{ratio}.csv"),
                &String::from_utf8_lossy(&csv),
            )?;
        }
    }
    for ratio in SURFACE_BANDWIDTH_RATIOS {
        let v = mean(
            report
                .records
                .iter()
                .filter(|r| r[1] == ratio)
                .map(|r| r[2]),
        );
        report
            .summary
            .push((format!("mean_feasible_nodes@{ratio}"), v));
    }
    Ok(report)
}

fn latency_cut(
    seeds: &[u64],
    params: &ExperimentParams,
    files: &mut Artifacts,
) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new(
        "latency_cut",
        seeds,
        &["seed", "bandwidth_ratio", "rs_total_bps", "latency_s"],
    );
    for &seed in seeds {
        let s = topology(seed, params)?;
        let opt = full_configuration(
            &s,
            Location::ORIGIN,
            SeSource::Approx,
            Execution::Sequential,
        )?;
        let rs = linspace(0.0, 2.0 * opt.config.backhaul_rate, SURFACE_POINTS);
        for ratio in SURFACE_BANDWIDTH_RATIOS {
            let surf = latency_surface(
                &s,
                Location::ORIGIN,
                ratio * opt.config.bandwidth,
                &rs,
                &[FIXED_CPU_TOTAL],
                params.exec,
            )?;
            for (i, r) in rs.iter().enumerate() {
                report
                    .records
                    .push(vec![seed as f64, ratio, *r, surf.at(i, 0)]);
            }
        }
    }
    files.write(
        &format!("latency_cut_seed{}.csv", seeds[0]),
        &report.records_csv(),
    )?;
    for ratio in SURFACE_BANDWIDTH_RATIOS {
        // first backhaul total meeting the deadline, averaged over seeds
        let crossings: Vec<f64> = seeds
            .iter()
            .filter_map(|&seed| {
                report
                    .records
                    .iter()
                    .find(|r| {
                        r[0] == seed as f64
                            && r[1] == ratio
                            && r[3] <= s_req(params, seed) * (1.0 + 1e-9)
                    })
                    .map(|r| r[2])
            })
            .collect();
        if !crossings.is_empty() {
            report.summary.push((
                format!("mean_crossing_rs@{ratio}"),
                mean(crossings.into_iter()),
            ));
        }
    }
    Ok(report)
}

fn s_req(params: &ExperimentParams, seed: u64) -> f64 {
    topology(seed, params)
        .map(|s| s.latency_req)
        .unwrap_or(f64::NAN)
}

pub const CURVE_POINTS: usize = 200;

/// Sweep ranges: the usual `[0, 4e9]` cycles/s and `[1.8, 3.2]` Mbit/s,
/// widened when the optimum falls outside.
pub fn curve_ranges(opt_rs: f64, opt_f: f64) -> ((f64, f64), (f64, f64)) {
    let f = (0.0, 4e9f64.max(2.0 * opt_f));
    let rs = (1.8e6f64.min(0.5 * opt_rs), 3.2e6f64.max(1.5 * opt_rs));
    (f, rs)
}

fn cost_curves(
    seeds: &[u64],
    params: &ExperimentParams,
    files: &mut Artifacts,
) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new(
        "cost_curves",
        seeds,
        &["seed", "sweep", "rs_total_bps", "f_total_hz", "cost"],
    );
    let mut attained = true;
    for &seed in seeds {
        let s = topology(seed, params)?;
        let opt = full_configuration(
            &s,
            Location::ORIGIN,
            SeSource::Approx,
            Execution::Sequential,
        )?;
        let (fr, rr) = curve_ranges(opt.config.backhaul_rate, opt.config.cpu_freq);
        for (k, (sweep, grid)) in [
            (Sweep::Cpu, linspace(fr.0, fr.1, CURVE_POINTS)),
            (Sweep::Backhaul, linspace(rr.0, rr.1, CURVE_POINTS)),
        ]
        .into_iter()
        .enumerate()
        {
            let curve = cost_curve_with_oracle(&s, Location::ORIGIN, sweep, &grid)?;
            attained &= curve.optimum_attained();
            for p in &curve.points {
                report
                    .records
                    .push(vec![seed as f64, k as f64, p.rs_total, p.f_total, p.cost]);
            }
            let mut csv = Vec::new();
            curve
                .write_csv(&mut csv)
                .map_err(|e| Error::io("<memory>", e))?;
            files.write(
                &format!("cost_curves_seed{seed}_{}.csv", sweep.name()),
                &String::from_utf8_lossy(&csv),
            )?;
        }
    }
    report
        .summary
        .push(("optimum_attained_all".into(), f64::from(u8::from(attained))));
    Ok(report)
}

fn placement_audit(
    seeds: &[u64],
    params: &ExperimentParams,
    files: &mut Artifacts,
) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new(
        "placement_audit",
        seeds,
        &[
            "seed",
            "sca_x",
            "sca_y",
            "sca_cost",
            "grid_x",
            "grid_y",
            "grid_cost",
            "center_cost",
            "weighted_centroid_cost",
        ],
    );
    let bounds = Bounds::default();
    let results = params
        .exec
        .map_slice(seeds, |&seed| -> Result<(Vec<f64>, String, String)> {
            let s = generate(seed, params.dmax, params.n_users)?;
            let surface = cost_surface(&s, bounds, params.grid_res, Execution::Sequential)?;
            let (grid_loc, grid_cost) = surface.argmin();
            let sca = match sca_optimize(&s, DEFAULT_EPS, DEFAULT_MAX_ITER) {
                Ok(r) => r,
                Err(Error::NotConverged(r)) => *r,
                Err(e) => return Err(e),
            };
            let base = baselines(&s)?;
            let (gc, wc) = (
                direct_cost(base.geometric_center, &s),
                direct_cost(base.weighted_centroid, &s),
            );
            let mut csv = Vec::new();
            surface
                .write_csv(&mut csv)
                .map_err(|e| Error::io("<memory>", e))?;
            let mut marks = String::from("label,x,y,cost\n");
            for (label, loc, cost) in [
                ("sca", sca.location, sca.cost),
                ("grid_optimum", grid_loc, grid_cost),
                ("geometric_center_heuristic", base.geometric_center, gc),
                ("weighted_centroid_heuristic", base.weighted_centroid, wc),
            ] {
                let _ = writeln!(marks, "{label},{},{},{cost}", loc.x, loc.y);
            }
            let row = vec![
                seed as f64,
                sca.location.x,
                sca.location.y,
                sca.cost,
                grid_loc.x,
                grid_loc.y,
                grid_cost,
                gc,
                wc,
            ];
            Ok((row, String::from_utf8_lossy(&csv).into_owned(), marks))
        });
    for (seed, r) in seeds.iter().zip(results) {
        let (row, surface, marks) = r?;
        files.write(
            &format!(
                "placement_audit_seed{seed}_res{}_surface.csv",
                params.grid_res
            ),
            &surface,
        )?;
        files.write(&format!("placement_audit_seed{seed}_markers.csv"), &marks)?;
        report.records.push(row);
    }
    let within = report
        .records
        .iter()
        .filter(|r| r[3] <= r[6] * 1.005)
        .count();
    report.summary.push((
        "fraction_within_0.5pct_of_grid".into(),
        within as f64 / seeds.len() as f64,
    ));
    report.summary.push((
        "mean_gap_vs_grid".into(),
        mean(report.records.iter().map(|r| r[3] / r[6] - 1.0)),
    ));
    report.summary.push((
        "mean_gain_vs_geometric_center".into(),
        mean(report.records.iter().map(|r| 1.0 - r[3] / r[7])),
    ));
    report.summary.push((
        "mean_gain_vs_weighted_centroid".into(),
        mean(report.records.iter().map(|r| 1.0 - r[3] / r[8])),
    ));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logspace_endpoints() {
        let v = logspace(1e6, 1e8, 10);
        assert_eq!(v.len(), 10);
        assert!((v[0] - 1e6).abs() < 1e-6);
        assert!((v[9] - 1e8).abs() < 1e-4);
    }

    #[test]
    fn unknown_experiment() {
        let err = run_experiment("no_such_experiment", &[1], &ExperimentParams::default());
        assert!(matches!(err, Err(Error::UnknownExperiment(_))));
    }

    #[test]
    fn dmax_sweep_is_deterministic() {
        let p = ExperimentParams::default();
        let a = run_experiment("dmax_sweep", &[1, 2], &p).unwrap();
        let b = run_experiment(
            "dmax_sweep",
            &[1, 2],
            &ExperimentParams {
                exec: Execution::Sequential,
                ..p
            },
        )
        .unwrap();
        assert_eq!(a.records_csv(), b.records_csv());
        assert_eq!(a.records.len(), 2 * FIG3_DMAX_POINTS);
        assert_eq!(a.summary_value("proposed_dominates_all"), Some(1.0));
    }
}
