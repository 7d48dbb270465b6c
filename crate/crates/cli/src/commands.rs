//! Subcommand implementations.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};
use tcvrp::aggregate::InstanceParams;
use tcvrp::city::{generate, City, CityConfig};
use tcvrp::defaults;
use tcvrp::exact::{solve_exact_with, ExactConfig, Status};
use tcvrp::its::{best_of_runs, ItsConfig};
use tcvrp::metrics::{summarize, write_csv, EnergyParams, GapStats, ScenarioKey, VehicleType};
use tcvrp::model::{build_mip, export_mps as write_mps_file};
use tcvrp::pipeline::{prepare, PipelineConfig};
use tcvrp::sweep::{run_sweep, Axis, AxisSweep, BaseParams, CellFailure, SolverChoice, SweepConfig};
use tcvrp::{validate, Solution, TcvrpInstance};

use crate::{CliError, CliResult, ExportArgs, GenArgs, LimitArgs, PipelineArgs, ReportArgs, Solver, SolveArgs, SweepArgs, Vehicle};

/// Instances above this many super-locations go to ITS under `auto`.
const AUTO_EXACT_MAX: usize = 60;

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn load_instance(path: &Path) -> CliResult<TcvrpInstance> {
    let text = fs::read_to_string(path)?;
    TcvrpInstance::from_json_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

pub fn gen(a: GenArgs) -> CliResult<()> {
    let mut cfg: CityConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => CityConfig::default(),
    };
    if let Some(v) = a.name {
        cfg.name = v;
    }
    if let Some(v) = a.households {
        cfg.households = v;
    }
    if let Some(v) = a.extent_mi {
        cfg.extent_mi = v;
    }
    if let Some(v) = a.block_mi {
        cfg.block_mi = v;
    }
    if let Some(v) = a.ordering_rate {
        cfg.ordering_rate = v;
    }
    if let Some(v) = a.depots_per_provider {
        cfg.depots_per_provider = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    let city = generate(&cfg)?;
    city.save(&a.out)?;
    println!(
        "city {}: {} ordering customers, {} depots, {} arcs -> {}",
        cfg.name,
        city.customers.len(),
        city.depots.len(),
        city.network.arcs().len(),
        a.out.display()
    );
    Ok(())
}

fn instance_params(l: &LimitArgs) -> CliResult<InstanceParams> {
    let range = match l.vehicle {
        Some(Vehicle::Cv) => {
            if l.dbar_mi.is_some() {
                return Err(CliError::Usage("--dbar-mi applies to bev only".into()));
            }
            None
        }
        _ => Some(l.dbar_mi.unwrap_or(defaults::BEV_RANGE_MI)),
    };
    Ok(InstanceParams {
        capacity: l.q.unwrap_or(defaults::CAPACITY),
        max_time_min: l.tbar_h.unwrap_or(defaults::MAX_TIME_H) * 60.0,
        dwell_min: l.p_min.unwrap_or(defaults::DWELL_MIN),
        max_dist_mi: range,
    })
}

#[derive(Serialize)]
struct ManifestDepot {
    depot_id: String,
    provider: Option<String>,
    customers: usize,
    super_locations: usize,
    file: String,
}

#[derive(Serialize)]
struct Manifest {
    seed: u64,
    city: String,
    shared_economy: bool,
    params: InstanceParams,
    depots: Vec<ManifestDepot>,
}

pub const MANIFEST_FILE: &str = "pipeline.json";

pub fn pipeline(a: PipelineArgs) -> CliResult<()> {
    let city = City::load(&a.city)?;
    let params = instance_params(&a.limits)?;
    let seed = a.seed.unwrap_or(city.config.seed);
    let cfg = PipelineConfig {
        seed,
        shared_economy: a.shared_economy,
        ..Default::default()
    };
    fs::create_dir_all(&a.out)?;
    let mut manifest = Manifest {
        seed,
        city: city.config.name.clone(),
        shared_economy: a.shared_economy,
        params,
        depots: Vec::new(),
    };
    for d in prepare(&city, &cfg)? {
        let inst = d.instance(&params)?.with_seed(seed);
        let file = format!("{}.json", d.depot_id);
        inst.save(a.out.join(&file))?;
        println!(
            "{}: {} customers, {} super-locations",
            d.depot_id,
            d.customers(),
            d.super_locations.len()
        );
        manifest.depots.push(ManifestDepot {
            depot_id: d.depot_id.clone(),
            provider: d.provider.clone(),
            customers: d.customers(),
            super_locations: d.super_locations.len(),
            file,
        });
    }
    write_file(&a.out.join(MANIFEST_FILE), &serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

/// What `solve` writes.
#[derive(Debug, Serialize, Deserialize)]
pub struct SolveOutput {
    pub seed: u64,
    pub solver: String,
    pub status: String,
    pub vmt_mi: f64,
    pub vehicles: usize,
    /// ι, exact solver only.
    pub lower: Option<f64>,
    /// υ, exact solver only.
    pub upper: Option<f64>,
    pub mip_gap_pct: Option<f64>,
    pub elapsed_s: f64,
    pub solution: Solution,
}

fn apply_limits(inst: TcvrpInstance, l: &LimitArgs) -> CliResult<TcvrpInstance> {
    if l.p_min.is_some() {
        return Err(CliError::Usage(
            "--p-min changes service times; rebuild the instance with `pipeline`".into(),
        ));
    }
    if l.q.is_none() && l.tbar_h.is_none() && l.dbar_mi.is_none() && l.vehicle.is_none() {
        return Ok(inst);
    }
    let range = match l.vehicle {
        Some(Vehicle::Cv) => {
            if l.dbar_mi.is_some() {
                return Err(CliError::Usage("--dbar-mi applies to bev only".into()));
            }
            None
        }
        Some(Vehicle::Bev) => Some(l.dbar_mi.or(inst.max_dist()).unwrap_or(defaults::BEV_RANGE_MI)),
        None => l.dbar_mi.or(inst.max_dist()),
    };
    Ok(inst.with_limits(
        l.q.unwrap_or(inst.capacity()),
        l.tbar_h.map_or(inst.max_time(), |h| h * 60.0),
        range,
    )?)
}

pub fn solve(a: SolveArgs) -> CliResult<()> {
    let inst = apply_limits(load_instance(&a.instance)?, &a.limits)?;
    let seed = a.seed.or(inst.seed()).unwrap_or(0);
    let solver = match a.solver {
        Solver::Auto if inst.n() > AUTO_EXACT_MAX => Solver::Its,
        Solver::Auto => Solver::Exact,
        s => s,
    };
    let out = match solver {
        Solver::Exact => {
            let res = solve_exact_with(
                &inst,
                &ExactConfig {
                    time_limit_s: a.time_limit_s.unwrap_or(300.0),
                    seed,
                    ..Default::default()
                },
            )?;
            let gap = res.gap();
            let Some(solution) = res.solution else {
                return Err(CliError::Unsolved(match res.status {
                    Status::Infeasible => "instance is infeasible".into(),
                    s => format!("no feasible solution found ({s}, lower bound {:.4})", res.lower),
                }));
            };
            SolveOutput {
                seed,
                solver: "exact".into(),
                status: res.status.to_string(),
                vmt_mi: solution.vmt_mi,
                vehicles: solution.k,
                lower: Some(res.lower),
                upper: res.upper,
                mip_gap_pct: gap,
                elapsed_s: res.elapsed_s,
                solution,
            }
        }
        _ => {
            let cfg = ItsConfig {
                seed,
                time_budget_s: a.time_limit_s.unwrap_or(60.0),
                ..Default::default()
            };
            let res = best_of_runs(&inst, &cfg, a.runs)?;
            SolveOutput {
                seed,
                solver: "its".into(),
                status: "heuristic".into(),
                vmt_mi: res.cost,
                vehicles: res.solution.k,
                lower: None,
                upper: None,
                mip_gap_pct: None,
                elapsed_s: res.elapsed_s,
                solution: res.solution,
            }
        }
    };
    let report = validate(&inst, &out.solution)?;
    if !report.feasible {
        return Err(CliError::Unsolved(format!(
            "solver returned an invalid solution: {:?}",
            report.violations
        )));
    }
    let json = serde_json::to_string_pretty(&out)?;
    let line = format!(
        "solver={} status={} n={} vmt_mi={:.4} vht_h={:.4} vehicles={}{}",
        out.solver,
        out.status,
        inst.n(),
        out.vmt_mi,
        out.solution.vht_min / 60.0,
        out.vehicles,
        match (out.lower, out.mip_gap_pct) {
            (Some(l), Some(g)) => format!(" lower={l:.4} gap_pct={g:.4}"),
            _ => String::new(),
        }
    );
    match &a.out {
        Some(p) => {
            write_file(p, &json)?;
            println!("{line}");
        }
        None => {
            println!("{json}");
            eprintln!("{line}");
        }
    }
    Ok(())
}

pub fn export_mps(a: ExportArgs) -> CliResult<()> {
    let inst = load_instance(&a.instance)?;
    let model = build_mip(&inst)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_mps_file(&model, &a.out)?;
    let c = model.counts();
    println!("{} variables, {} constraints -> {}", c.variables, c.constraints, a.out.display());
    Ok(())
}

fn meta_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

#[derive(Serialize)]
struct GapRow {
    axis: Axis,
    value: f64,
    vehicle: VehicleType,
    gaps: GapStats,
}

#[derive(Serialize)]
struct SweepMeta<'a> {
    seed: u64,
    city: &'a str,
    shared_economy: bool,
    config: &'a SweepConfig,
    rows: usize,
    failures: &'a [CellFailure],
    gaps: Vec<GapRow>,
}

fn sweep_config(a: &SweepArgs) -> CliResult<SweepConfig> {
    let mut cfg: SweepConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => SweepConfig::default(),
    };
    let given: Vec<(Axis, &Vec<f64>)> = [
        (Axis::Capacity, &a.q),
        (Axis::MaxTime, &a.tbar_h),
        (Axis::Dwell, &a.p_min),
        (Axis::Range, &a.dbar_mi),
    ]
    .into_iter()
    .filter(|(_, v)| !v.is_empty())
    .collect();
    if !given.is_empty() {
        let defaults = SweepConfig::default().axes;
        cfg.axes = given
            .into_iter()
            .map(|(axis, values)| {
                let base = cfg
                    .axes
                    .iter()
                    .chain(&defaults)
                    .find(|s| s.axis == axis)
                    .map_or_else(BaseParams::default, |s| s.base);
                AxisSweep {
                    axis,
                    values: values.clone(),
                    base,
                }
            })
            .collect();
    }
    if let Some(v) = a.vehicle {
        cfg.vehicles = vec![v.into()];
    }
    if let Some(s) = a.solver {
        cfg.solver = match s {
            Solver::Auto => SolverChoice::Auto,
            Solver::Exact => SolverChoice::Exact,
            Solver::Its => SolverChoice::Its,
        };
    }
    if let Some(t) = a.time_limit_s {
        cfg.its.time_budget_s = t;
        cfg.exact_time_limit_s = t;
    }
    if let Some(r) = a.runs {
        cfg.runs = r;
    }
    Ok(cfg)
}

pub fn sweep(a: SweepArgs) -> CliResult<()> {
    let city = City::load(&a.city)?;
    let seed = a.seed.unwrap_or(city.config.seed);
    let mut cfg = sweep_config(&a)?;
    cfg.city = city.config.name.clone();
    cfg.its.seed = seed;
    let depots = prepare(
        &city,
        &PipelineConfig {
            seed,
            shared_economy: a.shared_economy,
            ..Default::default()
        },
    )?;
    info!("sweeping {} depots", depots.len());
    let outcome = run_sweep(&depots, &cfg)?;
    let mut buf = Vec::new();
    write_csv(&mut buf, &outcome.reports())?;
    write_file(&a.out, &String::from_utf8(buf).expect("csv is utf-8"))?;
    let meta = SweepMeta {
        seed,
        city: &cfg.city,
        shared_economy: a.shared_economy,
        config: &cfg,
        rows: outcome.rows.len(),
        failures: &outcome.failures,
        gaps: outcome
            .rows
            .iter()
            .filter_map(|r| {
                r.report.gaps.map(|gaps| GapRow {
                    axis: r.axis,
                    value: r.value,
                    vehicle: r.report.key.vehicle,
                    gaps,
                })
            })
            .collect(),
    };
    write_file(&meta_path(&a.out), &serde_json::to_string_pretty(&meta)?)?;
    println!(
        "{} rows, {} failed cells -> {}",
        outcome.rows.len(),
        outcome.failures.len(),
        a.out.display()
    );
    if outcome.rows.is_empty() {
        return Err(CliError::Unsolved("every sweep cell failed".into()));
    }
    Ok(())
}

fn load_solution(path: &Path) -> CliResult<Solution> {
    let text = fs::read_to_string(path)?;
    if let Ok(out) = serde_json::from_str::<SolveOutput>(&text) {
        return Ok(out.solution);
    }
    Solution::from_json_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn report(a: ReportArgs) -> CliResult<()> {
    if a.instance.len() != a.solution.len() {
        return Err(CliError::Usage(format!(
            "{} instances but {} solutions",
            a.instance.len(),
            a.solution.len()
        )));
    }
    let insts = a.instance.iter().map(|p| load_instance(p)).collect::<CliResult<Vec<_>>>()?;
    let sols = a.solution.iter().map(|p| load_solution(p)).collect::<CliResult<Vec<_>>>()?;
    let first = &insts[0];
    if insts.iter().any(|i| {
        i.capacity() != first.capacity() || i.max_time() != first.max_time() || i.max_dist() != first.max_dist()
    }) {
        return Err(CliError::Usage("instances in one report must share route limits".into()));
    }
    let vehicle = match a.vehicle {
        Some(v) => v.into(),
        None if first.max_dist().is_some() => VehicleType::Bev,
        None => VehicleType::Cv,
    };
    let key = ScenarioKey {
        city: a.city.clone(),
        capacity: first.capacity(),
        max_time_h: first.max_time() / 60.0,
        dwell_min: a.p_min.unwrap_or(defaults::DWELL_MIN),
        max_dist_mi: first.max_dist(),
        vehicle,
    };
    let pairs: Vec<(&TcvrpInstance, &Solution)> = insts.iter().zip(&sols).collect();
    let rep = summarize(&pairs, key, &EnergyParams::default()).map_err(|e| CliError::Unsolved(e.to_string()))?;
    let mut buf = Vec::new();
    write_csv(&mut buf, std::slice::from_ref(&rep))?;
    match &a.out {
        Some(p) => {
            write_file(p, &String::from_utf8(buf).expect("csv is utf-8"))?;
            let seed = a.seed.or(first.seed());
            write_file(&meta_path(p), &serde_json::to_string_pretty(&serde_json::json!({ "seed": seed }))?)?;
        }
        None => std::io::stdout().write_all(&buf)?,
    }
    Ok(())
}
