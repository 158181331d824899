//! Subcommand implementations. Each writes its files under the output
//! directory and returns a one-line summary.

use std::path::{Path, PathBuf};
use std::time::Instant;

use fusedpnt_core::cost::{cost_report, measure_reservations, CostReport, MeasuredReservations};
use fusedpnt_core::orbit::propagate;
use fusedpnt_core::population::{par_pipeline, synth_density, track_samples, ParPipeline};
use fusedpnt_core::schedule::{check_feasibility, CheckInput, FeasibilityReport, Kind};
use fusedpnt_core::scheduler::{schedule, CellOrder, ScheduleStats};
use serde::Serialize;
use toml::Value;

use crate::error::{CliError, CliResult};
use crate::io;
use crate::scenario::{Scenario, Sweep};

#[derive(Debug, Clone, Default)]
pub struct Options {
    pub scenario: PathBuf,
    pub seed: Option<u64>,
    pub sweeps: Vec<Sweep>,
    pub out: Option<PathBuf>,
    pub order: Option<CellOrder>,
}

impl Options {
    fn overrides(&self) -> Vec<(String, Value)> {
        let mut o = Vec::new();
        if let Some(seed) = self.seed {
            let v = Value::Integer(seed as i64);
            o.push(("scheduler.rng_seed".to_string(), v.clone()));
            o.push(("population.par.rng_seed".to_string(), v));
        }
        if let Some(order) = self.order {
            let name = match order {
                CellOrder::Id => "id",
                CellOrder::Random => "random",
                CellOrder::Geo => "geo",
            };
            o.push(("scheduler.order".to_string(), Value::String(name.to_string())));
        }
        o
    }

    pub fn load(&self) -> CliResult<Scenario> {
        Scenario::load_with(&self.scenario, &self.overrides())
    }

    fn out_dir(&self, sc: &Scenario) -> PathBuf {
        self.out.clone().unwrap_or_else(|| sc.output_dir.clone())
    }

    fn no_sweep(&self, cmd: &str) -> CliResult<()> {
        if self.sweeps.is_empty() {
            Ok(())
        } else {
            Err(CliError::Parse(format!("--sweep is only supported by `cost`, not `{cmd}`")))
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct SweepRow {
    sweep: serde_json::Map<String, serde_json::Value>,
    #[serde(flatten)]
    report: CostReport,
}

fn combinations(sweeps: &[Sweep]) -> Vec<Vec<(String, Value)>> {
    let mut combos = vec![Vec::new()];
    for s in sweeps {
        combos = combos
            .into_iter()
            .flat_map(|c| {
                s.values.iter().map(move |v| {
                    let mut c = c.clone();
                    c.push((s.key.clone(), v.clone()));
                    c
                })
            })
            .collect();
    }
    combos
}

fn toml_to_json(v: &Value) -> serde_json::Value {
    serde_json::to_value(v).unwrap_or(serde_json::Value::Null)
}

pub fn cmd_cost(opts: &Options) -> CliResult<String> {
    let base = opts.load()?;
    let out = opts.out_dir(&base);
    if opts.sweeps.is_empty() {
        let report = cost_report(&base.cost_params())?;
        io::write_json(&out.join("cost_report.json"), &report)?;
        io::write_flat_csv(&out.join("cost_report.csv"), std::slice::from_ref(&report))?;
        return Ok(format!(
            "R_TX {:.4}%  R_RX {:.4}%  R_DL {:.4}%  R_SU {:.3}%  R_E {:.3}%  C_AU {:.1} MiB  d_PNT {:.3}%",
            report.r_tx * 100.0,
            report.r_rx * 100.0,
            report.r_dl * 100.0,
            report.r_su * 100.0,
            report.r_e * 100.0,
            report.uplink.total_mib,
            report.ut.d_pnt * 100.0
        ));
    }
    let mut rows = Vec::new();
    for combo in combinations(&opts.sweeps) {
        let mut all = opts.overrides();
        all.extend(combo.iter().cloned());
        let sc = Scenario::load_with(&opts.scenario, &all)?;
        let report = cost_report(&sc.cost_params())?;
        let sweep = combo.iter().map(|(k, v)| (k.clone(), toml_to_json(v))).collect();
        rows.push(SweepRow { sweep, report });
    }
    io::write_json(&out.join("cost_sweep.json"), &rows)?;
    io::write_flat_csv(&out.join("cost_sweep.csv"), &rows)?;
    Ok(format!("{} sweep rows written to {}", rows.len(), out.display()))
}

#[derive(Debug, Clone, Serialize)]
struct MeasuredVsAnalytic {
    analytic: CostReport,
    measured: MeasuredReservations,
}

pub fn cmd_schedule(opts: &Options) -> CliResult<String> {
    opts.no_sweep("schedule")?;
    let sc = opts.load()?;
    if sc.constellation.shells.is_empty() {
        return Err(CliError::Parse("scheduling needs at least one [[constellation.shells]] entry".into()));
    }
    let out = opts.out_dir(&sc);
    let grid = sc.build_grid()?;
    let t0 = Instant::now();
    let run = schedule(&grid, &sc.constellation, &sc.timing, &sc.scheduler)?;
    let elapsed = t0.elapsed();
    let report = check_feasibility(&CheckInput {
        schedule: &run.schedule,
        grid: &grid,
        config: &sc.constellation,
        timing: &sc.timing,
        states: Some(&run.states),
    });

    let layout = sc.codec.layout_for(&run.schedule, grid.sweep_time_us());
    io::write_json(&out.join("schedule.json"), &run.schedule)?;
    io::write_bytes(&out.join("schedule.bin"), &io::encode_schedule(&run.schedule, &layout)?)?;
    io::write_json(&out.join("stats.json"), &run.stats)?;
    io::write_json(&out.join("feasibility.json"), &report)?;
    io::write_grid_csv(&out.join("grid.csv"), &grid)?;
    io::write_sv_states_csv(&out.join("sv_states.csv"), &run.states)?;
    let params = sc.cost_params().for_schedule(&grid);
    if let Ok(analytic) = cost_report(&params) {
        let measured = measure_reservations(&run.schedule, &run.tx, &run.rx, &grid, &params);
        io::write_json(&out.join("reservations.json"), &MeasuredVsAnalytic { analytic, measured })?;
    }

    let summary = schedule_summary(&run.stats, &report, grid.len(), run.schedule.count_kind(Kind::Primary), elapsed.as_secs_f64());
    classify(&run.stats, &report, summary)
}

fn schedule_summary(stats: &ScheduleStats, report: &FeasibilityReport, cells: usize, primaries: usize, secs: f64) -> String {
    format!(
        "{} cells, {} assignments ({} primary), {} steps, {} failed cells, {} violations, {:.2} s",
        cells,
        report.n_assignments,
        primaries,
        stats.total_steps,
        stats.cells_failed.len(),
        report.violations.len(),
        secs
    )
}

fn list(ids: &[u32]) -> String {
    let shown: Vec<String> = ids.iter().take(20).map(u32::to_string).collect();
    let more = if ids.len() > 20 { format!(" (+{} more)", ids.len() - 20) } else { String::new() };
    format!("{}{more}", shown.join(", "))
}

fn classify(stats: &ScheduleStats, report: &FeasibilityReport, summary: String) -> CliResult<String> {
    if !stats.cells_without_visibility.is_empty() {
        return Err(CliError::Geometry(format!(
            "{summary}; cells without enough usable SVs: {}",
            list(&stats.cells_without_visibility)
        )));
    }
    if !stats.cells_failed.is_empty() {
        return Err(CliError::Feasibility(format!("{summary}; unscheduled cells: {}", list(&stats.cells_failed))));
    }
    if !report.is_feasible() {
        return Err(CliError::Feasibility(summary));
    }
    Ok(summary)
}

pub fn cmd_check(opts: &Options, schedule_path: &Path) -> CliResult<String> {
    opts.no_sweep("check")?;
    let sc = opts.load()?;
    let sched = io::read_schedule(schedule_path)?;
    if sched.t_period_us != sc.timing.t_period_us {
        return Err(CliError::Parse(format!(
            "schedule period {} us does not match scenario period {} us",
            sched.t_period_us, sc.timing.t_period_us
        )));
    }
    let grid = sc.build_grid()?;
    let states = propagate(&sc.constellation, grid.params().earth_radius_km, sc.scheduler.epoch_s);
    let report = check_feasibility(&CheckInput {
        schedule: &sched,
        grid: &grid,
        config: &sc.constellation,
        timing: &sc.timing,
        states: Some(&states),
    });
    if let Some(out) = &opts.out {
        io::write_json(&out.join("feasibility.json"), &report)?;
    }
    let counts: Vec<String> = report.counts().iter().map(|(r, n)| format!("{r:?}: {n}")).collect();
    let summary = format!(
        "{} assignments over {} cells, {} violations{}{}",
        report.n_assignments,
        report.n_cells,
        report.violations.len(),
        if counts.is_empty() { "" } else { " - " },
        counts.join(", ")
    );
    if report.is_feasible() {
        Ok(summary)
    } else {
        Err(CliError::Feasibility(summary))
    }
}

pub fn cmd_par(opts: &Options) -> CliResult<String> {
    opts.no_sweep("par")?;
    let sc = opts.load()?;
    let pop = &sc.population;
    let radius = pop.par.earth_radius_km;
    let world = match (&pop.world_raster, &pop.synth) {
        (Some(p), _) => io::load_density_grid(&sc.resolve(p))?,
        (None, Some(spec)) => synth_density(spec, pop.synth_cellsize_deg.unwrap_or(0.5), radius)?,
        (None, None) => {
            return Err(CliError::Parse(
                "population needs `world_raster` or a `[population.synth]` table".into(),
            ))
        }
    };
    let reference = pop.reference_raster.as_ref().map(|p| io::load_density_grid(&sc.resolve(p))).transpose()?;
    let (result, counts): (ParPipeline, _) = par_pipeline(&world, reference.as_ref(), &pop.par)?;
    let out = opts.out_dir(&sc);
    io::write_json(&out.join("par_report.json"), &result)?;
    io::write_ascii_grid(&out.join("visible_counts.asc"), &counts)?;
    let samples = track_samples(&counts, pop.par.inclination_deg, pop.par.n_orbit_samples, pop.par.rng_seed)?;
    io::write_track_samples_csv(&out.join("track_samples.csv"), &samples)?;
    Ok(format!(
        "PAR {:.3} (peak {:.4e}, mean {:.4e}, rho_max {:.2} /km2{})",
        result.report.par,
        result.report.peak,
        result.report.mean,
        result.rho_max,
        result.threshold.map(|t| format!(", threshold {t:.2} /km2")).unwrap_or_default()
    ))
}
