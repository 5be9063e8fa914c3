use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use eih_core::bench::{self, ExperimentParams};
use eih_core::channel::{
    channel_state, spectral_efficiency_approx, spectral_efficiency_bracket, SeSource,
};
use eih_core::config_opt::{full_configuration, lp_oracle, optimal_backhaul_compute, task_of};
use eih_core::dataflow::{latency_storage, simulate_fluid, Resources};
use eih_core::placement::{self, baselines, direct_cost, sca_optimize, Bounds};
use eih_core::scenario::{self, generate, read_scenario, validate, write_scenario_string};
use eih_core::scheduling::{optimal_eta, sweep_eta_oracle};
use eih_core::{report, Error, Execution, Location, Scenario};

/// Resource and placement planning for a UAV-mounted edge information hub.
#[derive(Debug, Parser)]
#[command(name = "eih", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Worker threads for grid and experiment loops (1 = sequential).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    /// Print diagnostics to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimal configuration at a fixed hub location.
    Plan(PlanArgs),
    /// Optimize the hub location.
    Place(PlaceArgs),
    /// Worst-sensor completion time over backhaul and compute totals.
    Surface(SurfaceArgs),
    /// Run a reproduction experiment.
    Bench(BenchArgs),
    /// Check a scenario and run the oracle self-tests on it.
    Validate(ScenarioArgs),
    /// Write a random scenario.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AngleArg {
    Deg,
    Rad,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SeArg {
    Approx,
    Mc,
    Exact,
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    /// Scenario file (TOML).
    #[arg(long, value_name = "PATH")]
    scenario: PathBuf,

    /// Override a scenario field, e.g. `cost.a2="3 per Mbit/s"`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Angle unit inside the line-of-sight sigmoid.
    #[arg(long, value_enum)]
    angle_unit: Option<AngleArg>,
}

#[derive(Debug, Args)]
struct PlanArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,

    /// Hub location `X,Y` in meters.
    #[arg(long, value_name = "X,Y", default_value = "0,0")]
    loc: String,

    #[arg(long, value_enum, default_value = "approx")]
    se_source: SeArg,

    /// Monte Carlo seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Directory for plan.toml and per_user.csv.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PlaceArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,

    /// Relative change of the total bandwidth that stops the iteration.
    #[arg(long, default_value_t = placement::DEFAULT_EPS)]
    eps: f64,

    #[arg(long, default_value_t = placement::DEFAULT_MAX_ITER)]
    max_iter: usize,

    /// Also run a grid search with this resolution (meters) and report the gap.
    #[arg(long, value_name = "METERS")]
    audit_grid: Option<f64>,

    /// Half-width of the square searched by the grid audit, meters.
    #[arg(long, default_value_t = 1000.0)]
    grid_extent: f64,

    /// Directory for placement.toml, sca_trace.csv and the grid cost surface.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SurfaceArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,

    #[arg(long, value_name = "X,Y", default_value = "0,0")]
    loc: String,

    /// Bandwidth total as a multiple of the optimum.
    #[arg(long, default_value_t = 1.0)]
    bandwidth_ratio: f64,

    /// Nodes per axis; each axis spans [0, 2x] of the optimal total.
    #[arg(long, default_value_t = 100)]
    points: usize,

    /// Output CSV file; stdout when omitted.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// dmax_sweep, feasible_region, latency_cut, cost_curves or placement_audit.
    #[arg(long)]
    experiment: String,

    /// Seeds: a count `N` (0..N), a range `A..B` or a list `1,5,9`.
    #[arg(long, default_value = "50")]
    seeds: String,

    /// Topology for feasible_region, latency_cut and cost_curves instead of a generated one.
    #[arg(long, value_name = "PATH")]
    scenario: Option<PathBuf>,

    /// Grid resolution of placement_audit, meters.
    #[arg(long, default_value_t = 10.0)]
    grid_res: f64,

    /// Directory for the CSV artifacts.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Largest data volume, bits.
    #[arg(long, default_value_t = 1e8)]
    dmax: f64,

    #[arg(long, default_value_t = bench::DEFAULT_USERS)]
    users: usize,

    /// Output file; stdout when omitted.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

struct Ctx {
    exec: Execution,
    verbose: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 1 for usage and input problems, 2 when the problem itself has no
/// acceptable solution or a solver fails.
fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(
            Error::Infeasible(_)
            | Error::Solver { .. }
            | Error::NotConverged(_)
            | Error::NeverCompletes(_)
            | Error::Unreachable { .. },
        ) => 2,
        Some(_) | None => {
            if e.downcast_ref::<SelfTestFailure>().is_some() {
                2
            } else {
                1
            }
        }
    }
}

#[derive(Debug)]
struct SelfTestFailure(usize);

impl std::fmt::Display for SelfTestFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} oracle self-test(s) failed", self.0)
    }
}

impl std::error::Error for SelfTestFailure {}

fn run(cli: Cli) -> anyhow::Result<()> {
    let exec = configure_jobs(cli.jobs)?;
    let ctx = Ctx {
        exec,
        verbose: cli.verbose,
    };
    match cli.command {
        Command::Plan(a) => plan(&ctx, a),
        Command::Place(a) => place(&ctx, a),
        Command::Surface(a) => surface(&ctx, a),
        Command::Bench(a) => run_bench(&ctx, a),
        Command::Validate(a) => validate_cmd(&ctx, a),
        Command::Generate(a) => generate_cmd(a),
    }
}

fn configure_jobs(jobs: Option<usize>) -> anyhow::Result<Execution> {
    match jobs {
        Some(0) => bail!("--jobs must be at least 1"),
        Some(1) => Ok(Execution::Sequential),
        Some(_n) => {
            #[cfg(feature = "parallel")]
            rayon::ThreadPoolBuilder::new()
                .num_threads(_n)
                .build_global()
                .context("configuring the worker pool")?;
            Ok(Execution::Parallel)
        }
        None => Ok(Execution::Parallel),
    }
}

fn load(args: &ScenarioArgs) -> anyhow::Result<Scenario> {
    let mut s = read_scenario(&args.scenario)?;
    for o in &args.overrides {
        scenario::apply_override(&mut s, o)?;
    }
    if let Some(unit) = args.angle_unit {
        s.angle_unit = match unit {
            AngleArg::Deg => scenario::AngleUnit::Degrees,
            AngleArg::Rad => scenario::AngleUnit::Radians,
        };
    }
    Ok(s.validated()?)
}

fn parse_loc(text: &str) -> anyhow::Result<Location> {
    let (x, y) = text
        .split_once(',')
        .ok_or_else(|| Error::InvalidInput(format!("--loc `{text}`: expected X,Y")))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<f64>()
            .map_err(|_| Error::InvalidInput(format!("--loc `{text}`: `{v}` is not a number")))
    };
    let loc = Location::new(parse(x)?, parse(y)?);
    if !loc.is_finite() {
        return Err(Error::InvalidInput(format!("--loc `{text}` is not finite")).into());
    }
    Ok(loc)
}

fn se_source(arg: SeArg, seed: u64) -> SeSource {
    match arg {
        SeArg::Approx => SeSource::Approx,
        SeArg::Mc => SeSource::MonteCarlo {
            samples: SeSource::DEFAULT_MC_SAMPLES,
            seed,
        },
        SeArg::Exact => SeSource::Exact,
    }
}

fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn plan(ctx: &Ctx, a: PlanArgs) -> anyhow::Result<()> {
    let s = load(&a.scenario)?;
    let loc = parse_loc(&a.loc)?;
    let source = se_source(a.se_source, a.seed);
    let cfg = full_configuration(&s, loc, source, ctx.exec)?;
    print!("{}", report::plan_text(&s, loc, &cfg));
    if ctx.verbose {
        eprint!("{}", report::per_user_csv(&s, &cfg));
    }
    if let Some(dir) = a.out {
        let name = match a.se_source {
            SeArg::Approx => "approx",
            SeArg::Mc => "mc",
            SeArg::Exact => "exact",
        };
        write_file(
            &dir.join("plan.toml"),
            &report::plan_toml(&s, loc, name, &cfg)?,
        )?;
        write_file(&dir.join("per_user.csv"), &report::per_user_csv(&s, &cfg))?;
    }
    Ok(())
}

fn place(ctx: &Ctx, a: PlaceArgs) -> anyhow::Result<()> {
    let s = load(&a.scenario)?;
    let sca = sca_optimize(&s, a.eps, a.max_iter)?;
    let base = baselines(&s)?;
    let costs = (
        direct_cost(base.geometric_center, &s),
        direct_cost(base.weighted_centroid, &s),
    );
    println!(
        "sca location  ({:.3}, {:.3}) m, cost {:.9}, {} iteration(s)",
        sca.location.x, sca.location.y, sca.cost, sca.iterations
    );
    println!(
        "geometric center heuristic ({:.3}, {:.3}) m, cost {:.9}",
        base.geometric_center.x, base.geometric_center.y, costs.0
    );
    println!(
        "weighted centroid heuristic ({:.3}, {:.3}) m, cost {:.9}",
        base.weighted_centroid.x, base.weighted_centroid.y, costs.1
    );
    if ctx.verbose {
        eprintln!("kkt residual {:?}", sca.kkt_residual);
        for t in &sca.trace {
            eprintln!(
                "iter {} ({}, {}) sum B {}",
                t.iter, t.location.x, t.location.y, t.sum_bandwidth
            );
        }
    }
    let mut extra = Vec::new();
    let mut surface_csv = None;
    if let Some(res) = a.audit_grid {
        let bounds = Bounds::square(a.grid_extent);
        let surface = placement::cost_surface(&s, bounds, res, ctx.exec)?;
        let (loc, cost) = surface.argmin();
        println!(
            "grid optimum  ({:.3}, {:.3}) m, cost {:.9}, sca gap {:+.3e}",
            loc.x,
            loc.y,
            cost,
            sca.cost / cost - 1.0
        );
        extra.push(("grid_optimum", loc, cost));
        let mut buf = Vec::new();
        surface.write_csv(&mut buf)?;
        surface_csv = Some(String::from_utf8(buf)?);
    }
    if let Some(dir) = a.out {
        write_file(
            &dir.join("placement.toml"),
            &report::placement_toml(&sca, &base, costs, &extra)?,
        )?;
        let mut trace = Vec::new();
        sca.write_trace_csv(&mut trace)?;
        write_file(&dir.join("sca_trace.csv"), &String::from_utf8(trace)?)?;
        if let Some(csv) = surface_csv {
            write_file(&dir.join("cost_surface.csv"), &csv)?;
        }
    }
    Ok(())
}

fn surface(ctx: &Ctx, a: SurfaceArgs) -> anyhow::Result<()> {
    let s = load(&a.scenario)?;
    let loc = parse_loc(&a.loc)?;
    if a.points == 0 {
        return Err(Error::InvalidInput("--points must be positive".into()).into());
    }
    let opt = full_configuration(&s, loc, SeSource::Approx, Execution::Sequential)?;
    let rs = bench::linspace(0.0, 2.0 * opt.config.backhaul_rate, a.points);
    let f = bench::linspace(
        0.0,
        2.0 * opt.config.cpu_freq.max(bench::FIXED_CPU_TOTAL / 2.0),
        a.points,
    );
    let surf = bench::latency_surface(
        &s,
        loc,
        a.bandwidth_ratio * opt.config.bandwidth,
        &rs,
        &f,
        ctx.exec,
    )?;
    let mut buf = Vec::new();
    surf.write_csv(&mut buf)?;
    let csv = String::from_utf8(buf)?;
    match a.out {
        Some(path) => write_file(&path, &csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn parse_seeds(text: &str) -> anyhow::Result<Vec<u64>> {
    let bad = || {
        Error::InvalidInput(format!(
            "--seeds `{text}`: expected N, A..B or a comma list"
        ))
    };
    let seeds: Vec<u64> = if let Some((a, b)) = text.split_once("..") {
        let (a, b): (u64, u64) = (
            a.trim().parse().map_err(|_| bad())?,
            b.trim().parse().map_err(|_| bad())?,
        );
        (a..b).collect()
    } else if text.contains(',') {
        text.split(',')
            .map(|v| v.trim().parse().map_err(|_| bad()))
            .collect::<Result<_, _>>()?
    } else {
        let n: u64 = text.trim().parse().map_err(|_| bad())?;
        (0..n).collect()
    };
    if seeds.is_empty() {
        return Err(bad().into());
    }
    Ok(seeds)
}

fn run_bench(ctx: &Ctx, a: BenchArgs) -> anyhow::Result<()> {
    let seeds = parse_seeds(&a.seeds)?;
    let scenario = match &a.scenario {
        Some(p) => Some(read_scenario(p)?.validated()?),
        None => None,
    };
    let params = ExperimentParams {
        out_dir: a.out,
        exec: ctx.exec,
        scenario,
        grid_res: a.grid_res,
        ..ExperimentParams::default()
    };
    let r = bench::run_experiment(&a.experiment, &seeds, &params)?;
    println!("{} over {} seed(s)", r.id, r.seeds.len());
    for (k, v) in &r.summary {
        println!("{k} = {v}");
    }
    if ctx.verbose {
        for p in &r.artifacts {
            eprintln!("wrote {}", p.display());
        }
    }
    Ok(())
}

fn generate_cmd(a: GenerateArgs) -> anyhow::Result<()> {
    let s = generate(a.seed, a.dmax, a.users)?;
    let text = write_scenario_string(&s);
    match a.out {
        Some(p) => write_file(&p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn validate_cmd(ctx: &Ctx, a: ScenarioArgs) -> anyhow::Result<()> {
    let mut s = read_scenario(&a.scenario)?;
    for o in &a.overrides {
        scenario::apply_override(&mut s, o)?;
    }
    let problems = validate(&s);
    if !problems.is_empty() {
        for p in &problems {
            println!("invalid: {p}");
        }
        return Err(Error::InvalidScenario(problems).into());
    }
    println!("scenario ok: {} sensor(s)", s.num_users());
    let mut failures = 0;
    let mut check = |name: &str, ok: bool, detail: String| {
        println!("{} {name}: {detail}", if ok { "ok  " } else { "FAIL" });
        if !ok {
            failures += 1;
        }
    };

    let loc = Location::ORIGIN;
    if s.noise_model == scenario::NoiseModel::FixedPower {
        let mut worst = 0.0f64;
        for u in &s.sensors {
            let gamma = channel_state(loc, u, &s).mean_snr;
            let approx = spectral_efficiency_approx(gamma)?;
            let fixed = ((approx.nu * (approx.nu - 1.0) - gamma) / gamma).abs();
            let forms =
                (spectral_efficiency_bracket(gamma, approx.nu) - approx.spectral_efficiency).abs()
                    / approx.spectral_efficiency;
            worst = worst.max(fixed).max(forms);
        }
        check(
            "nu fixed point",
            worst <= 1e-10,
            format!("max relative residual {worst:.2e}"),
        );
    }

    let lp = lp_oracle(&s);
    let closed = optimal_backhaul_compute(&s);
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-300);
    let lp_gap =
        rel(lp.backhaul_total, closed.backhaul_total).max(rel(lp.cpu_total, closed.cpu_total));
    check(
        "threshold rule vs LP",
        lp_gap <= 1e-12,
        format!("max relative gap {lp_gap:.2e}"),
    );

    let cfg = full_configuration(&s, loc, SeSource::Approx, ctx.exec);
    let mut eta_worst = 0.0f64;
    let mut fluid_worst = 0.0f64;
    if let Ok(cfg) = &cfg {
        for (u, alloc) in s.sensors.iter().zip(&cfg.per_user) {
            let task = task_of(u);
            let rate = u.data_volume / s.latency_req;
            for scale in [0.5, 1.0, 1.5] {
                let res = Resources::new(
                    rate,
                    alloc.backhaul_rate * scale,
                    alloc.cpu_freq * (2.0 - scale),
                );
                let opt = optimal_eta(&res, &task)?;
                let sweep = sweep_eta_oracle(&res, &task, 1e-3)?;
                if opt.latency.is_finite() {
                    eta_worst = eta_worst.max((opt.latency - sweep.latency) / sweep.latency);
                    let table = latency_storage(&res, opt.eta, &task)?;
                    let (sim, _) = simulate_fluid(&res, opt.eta, &task)?;
                    fluid_worst = fluid_worst
                        .max(rel(table.latency, sim.latency))
                        .max((table.storage - sim.storage).abs() / task.data);
                }
            }
        }
    }
    check(
        "optimal split vs split sweep",
        eta_worst <= 1e-9,
        format!("max relative excess {eta_worst:.2e}"),
    );
    check(
        "closed-form latency vs fluid simulation",
        fluid_worst <= 1e-9,
        format!("max relative difference {fluid_worst:.2e}"),
    );
    if let Err(e) = cfg {
        check("configuration at the origin", false, e.to_string());
    }
    if failures > 0 {
        return Err(anyhow!(SelfTestFailure(failures)));
    }
    Ok(())
}
