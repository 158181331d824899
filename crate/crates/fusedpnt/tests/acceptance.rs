//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Optional inputs:
//! * `FUSEDPNT_FULL_SCALE=1` runs the full-scale greedy schedule.
//! * `FUSEDPNT_GPW_WORLD` and `FUSEDPNT_GPW_REFERENCE` point at ASCII-grid
//!   population-density rasters (world, and the reference region for the
//!   unserved-population threshold).

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use fusedpnt::io::load_density_grid;
use fusedpnt::Scenario;
use fusedpnt_core::cost::{
    cost_report, measure_reservations, pointing_loss_db, rx_reservation_bound, steer_interval_for_budget,
    tx_reservation_bound,
};
use fusedpnt_core::grid::CellGrid;
use fusedpnt_core::population::{
    cap_density, density_threshold, par_estimate, par_pipeline, synth_density, visible_subscribers, DensityGrid,
    GaussianComponent, ParParams, SynthSpec,
};
use fusedpnt_core::geo::LatLon;
use fusedpnt_core::schedule::{check_feasibility, decode_assignment, encode_assignment, BitLayout, CheckInput, Tuple};
use fusedpnt_core::scheduler::{complexity_bound, schedule, Mode, SchedulerConfig};
use fusedpnt_core::EARTH_RADIUS_KM;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

struct Checks {
    notes: Vec<String>,
    failed: bool,
}

impl Checks {
    fn new() -> Self {
        Checks { notes: Vec::new(), failed: false }
    }

    fn check(&mut self, ok: bool, note: String) {
        if !ok {
            self.failed = true;
            self.notes.push(format!("{note} [FAIL]"));
        } else {
            self.notes.push(note);
        }
    }

    fn within(&mut self, name: &str, value: f64, target: f64, tol: f64, unit: &str) {
        self.check((value - target).abs() <= tol, format!("{name} {value:.4}{unit} (target {target}{unit} +/-{tol})"));
    }

    fn done(self) -> Outcome {
        let s = self.notes.join("; ");
        if self.failed {
            Outcome::Fail(s)
        } else {
            Outcome::Pass(s)
        }
    }
}

fn scenario(name: &str) -> Scenario {
    let p: PathBuf = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name);
    Scenario::load(&p).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn closed_form() -> Outcome {
    let t0 = Instant::now();
    let p = scenario("reference.scenario").cost_params();
    let r = match cost_report(&p) {
        Ok(r) => r,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let mut c = Checks::new();
    c.within("R_TX", r.r_tx * 100.0, 1.60, 0.05, "%");
    c.check(r.r_rx * 100.0 <= 0.03, format!("R_RX {:.4}% <= 0.03%", r.r_rx * 100.0));
    c.within("R_RX", r.r_rx * 100.0, 0.0275, 0.002, "%");
    c.within("R_DL", r.r_dl * 100.0, 1.60, 0.05, "%");
    c.within("loss/cell", r.per_cell_loss_bps / 1e6, 5.7, 0.1, " Mbps");
    c.within("R_SU", r.r_su * 100.0, 11.3, 0.1, "%");
    c.within("R_E", r.r_e * 100.0, 0.77, 0.02, "%");
    c.check(
        (r.complexity_bound_steps / 4.4e6 - 1.0).abs() <= 0.02,
        format!("bound {:.3e} steps (4.4e6 +/-2%)", r.complexity_bound_steps),
    );
    c.check(r.uplink.total_mib <= 54.0, format!("C_AU {:.2} MiB <= 54", r.uplink.total_mib));
    c.within("d_PNT", r.ut.d_pnt * 100.0, 0.33, 0.01, "%");
    c.within("d_UL bound", r.ut.d_ul_max * 100.0, 99.67, 0.005, "%");
    c.within("mean d_DL bound", r.ut.d_dl_mean_max * 100.0, 98.4, 0.05, "%");
    let secs = t0.elapsed().as_secs_f64();
    c.check(secs < 1.0, format!("{secs:.3} s"));
    c.done()
}

struct DeskRuns {
    outcome2: Outcome,
    outcome3: Outcome,
}

fn desk() -> DeskRuns {
    let t0 = Instant::now();
    let sc = scenario("desk.scenario");
    let grid = sc.build_grid().unwrap();
    let params = sc.cost_params().for_schedule(&grid);
    let r_tx = tx_reservation_bound(&params).unwrap();
    let r_rx = rx_reservation_bound(&params).unwrap();
    let bound = complexity_bound(sc.timing.n, grid.len(), r_tx, r_rx).unwrap();
    let mut c = Checks::new();
    let (mut violations, mut failed_cells, mut worst_tx, mut worst_rx) = (0usize, 0usize, 0f64, 0f64);
    let mut steps = Vec::new();
    for mode in [Mode::Greedy, Mode::Randomized] {
        for seed in 0..20 {
            let cfg = SchedulerConfig { mode, rng_seed: seed, ..sc.scheduler };
            let run = schedule(&grid, &sc.constellation, &sc.timing, &cfg).unwrap();
            let rep = check_feasibility(&CheckInput {
                schedule: &run.schedule,
                grid: &grid,
                config: &sc.constellation,
                timing: &sc.timing,
                states: Some(&run.states),
            });
            violations += rep.violations.len();
            failed_cells += run.stats.cells_failed.len();
            let m = measure_reservations(&run.schedule, &run.tx, &run.rx, &grid, &params);
            worst_tx = worst_tx.max(m.r_tx);
            worst_rx = worst_rx.max(m.r_rx);
            if mode == Mode::Randomized {
                steps.push(run.stats.total_steps as f64);
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    c.check(true, format!("{} cells, {} SVs, 2 x 20 seeds", grid.len(), sc.constellation.n_sats()));
    c.check(violations == 0 && failed_cells == 0, format!("{violations} violations, {failed_cells} failed cells"));
    c.check(worst_tx <= r_tx, format!("max R_TX meas {:.4}% <= bound {:.4}%", worst_tx * 100.0, r_tx * 100.0));
    c.check(worst_rx <= r_rx, format!("max R_RX meas {:.4}% <= bound {:.4}%", worst_rx * 100.0, r_rx * 100.0));
    c.check(secs <= 60.0, format!("{secs:.1} s"));

    let mean = steps.iter().sum::<f64>() / steps.len() as f64;
    let mut c3 = Checks::new();
    c3.check(
        mean <= 1.5 * bound,
        format!("mean steps {mean:.0} over 20 seeds, bound {bound:.0}, ratio {:.3} <= 1.5", mean / bound),
    );
    DeskRuns { outcome2: c.done(), outcome3: c3.done() }
}

fn full_scale() -> Outcome {
    if std::env::var_os("FUSEDPNT_FULL_SCALE").is_none() {
        return Outcome::Skip("optional; set FUSEDPNT_FULL_SCALE=1 (release build recommended)".into());
    }
    let t0 = Instant::now();
    let sc = scenario("full.scenario");
    let grid = sc.build_grid().unwrap();
    let run = schedule(&grid, &sc.constellation, &sc.timing, &sc.scheduler).unwrap();
    let rep = check_feasibility(&CheckInput {
        schedule: &run.schedule,
        grid: &grid,
        config: &sc.constellation,
        timing: &sc.timing,
        states: Some(&run.states),
    });
    let params = sc.cost_params().for_schedule(&grid);
    let m = measure_reservations(&run.schedule, &run.tx, &run.rx, &grid, &params);
    let mut c = Checks::new();
    c.check(true, format!("{} cells, {} SVs", grid.len(), sc.constellation.n_sats()));
    c.check(
        rep.is_feasible() && run.stats.cells_failed.is_empty(),
        format!("{} violations, {} failed cells", rep.violations.len(), run.stats.cells_failed.len()),
    );
    c.check(m.r_tx <= 0.0160, format!("R_TX meas {:.4}% <= 1.60%", m.r_tx * 100.0));
    let r_rx = rx_reservation_bound(&params).unwrap();
    c.check(m.r_rx <= r_rx, format!("R_RX meas {:.5}% <= bound {:.5}%", m.r_rx * 100.0, r_rx * 100.0));
    let secs = t0.elapsed().as_secs_f64();
    c.check(secs <= 1800.0, format!("{secs:.0} s"));
    c.done()
}

fn codec() -> Outcome {
    let mut c = Checks::new();
    let mut rng = ChaCha8Rng::seed_from_u64(59);
    for (name, layout) in [("default", BitLayout::default().with_sweep(75)), ("long_flight", BitLayout::long_flight().with_sweep(1863))] {
        let max = |b: u32| (1u64 << b) as u32;
        let mut lost = 0;
        for _ in 0..100_000 {
            let t = Tuple {
                sv_id: rng.gen_range(0..max(layout.sv_bits)),
                beam_id: rng.gen_range(0..max(layout.beam_bits)) as u16,
                channel_id: rng.gen_range(0..max(layout.channel_bits)) as u16,
                t_tx_us: rng.gen_range(0..max(layout.t_tx_bits)),
                t_flight_us: rng.gen_range(0..max(layout.t_flight_bits)),
                t_sweep_us: if rng.gen_bool(0.5) { layout.sweep_us } else { 0 },
            };
            let ok = encode_assignment(&t, &layout).and_then(|w| decode_assignment(w, &layout)).map(|b| b == t).unwrap_or(false);
            lost += usize::from(!ok);
        }
        c.check(lost == 0, format!("{name}: 1e5 round trips, {lost} lossy"));
        c.check(layout.total_bits() == 59, format!("{name}: {} bits", layout.total_bits()));
    }
    c.done()
}

fn pointing() -> Outcome {
    let p = scenario("reference.scenario").cost_params();
    let t = steer_interval_for_budget(&p).unwrap();
    let mut c = Checks::new();
    c.check(
        (t / 0.260 - 1.0).abs() <= 0.15,
        format!("T_steer {:.0} ms for a 0.10% throughput budget (260 ms +/-15%)", t * 1e3),
    );
    let l = pointing_loss_db(p.fwhm_deg / 2.0, p.fwhm_deg);
    c.check(l == 3.0, format!("pointing loss at FWHM/2 = {l} dB"));
    c.done()
}

fn population() -> Outcome {
    let mut c = Checks::new();
    let uniform = synth_density(&SynthSpec::Uniform { density: 30.0 }, 0.5, EARTH_RADIUS_KM).unwrap();
    let counts = visible_subscribers(&uniform, 550.0, 40.0, EARTH_RADIUS_KM).unwrap();
    let par = par_estimate(&counts, 53.0, 50_000, 1, 99.9).unwrap().par;
    c.check((par - 1.0).abs() <= 0.02, format!("uniform PAR {par:.4}"));

    let mix = synth_density(
        &SynthSpec::GaussianMixture {
            components: vec![
                GaussianComponent { center: LatLon::new(40.0, -75.0), sigma_km: 400.0, peak: 800.0 },
                GaussianComponent { center: LatLon::new(28.0, 77.0), sigma_km: 600.0, peak: 1500.0 },
            ],
            background: 3.0,
        },
        1.0,
        EARTH_RADIUS_KM,
    )
    .unwrap();
    let capped = cap_density(&mix, 92.7);
    let idem = cap_density(&capped, 92.7) == capped;
    let dominated = capped.values.iter().zip(&mix.values).all(|(a, b)| *a == b.min(92.7));
    c.check(idem && dominated, format!("capping idempotent {idem}, pointwise min {dominated}"));

    let mut values = vec![5.0; 36];
    values[18..].iter_mut().for_each(|v| *v = 50.0);
    let two = DensityGrid::new(36, 1, 10.0, -180.0, -5.0, values, vec![true; 36]).unwrap();
    let low = 18.0 * 5.0 * two.cell_area_km2(0, EARTH_RADIUS_KM);
    let below = density_threshold(&two, 0.5 * low, EARTH_RADIUS_KM).unwrap();
    let above = density_threshold(&two, 1.5 * low, EARTH_RADIUS_KM).unwrap();
    c.check(below == 5.0 && above == 50.0, format!("two-bin thresholds {below} / {above}"));

    match (std::env::var_os("FUSEDPNT_GPW_WORLD"), std::env::var_os("FUSEDPNT_GPW_REFERENCE")) {
        (Some(w), Some(r)) => {
            let world = load_density_grid(Path::new(&w)).unwrap();
            let reference = load_density_grid(Path::new(&r)).unwrap();
            let params = ParParams::default();
            let (res, _) = par_pipeline(&world, Some(&reference), &params).unwrap();
            let th = res.threshold.unwrap();
            c.check((th / 63.2 - 1.0).abs() <= 0.10, format!("threshold {th:.1} /km2 (63.2 +/-10%)"));
            c.check(res.rho_max == params.gamma * th, format!("rho_max {:.1} = gamma x threshold", res.rho_max));
            c.check((res.report.par / 9.6 - 1.0).abs() <= 0.15, format!("PAR {:.2} (9.6 +/-15%)", res.report.par));
        }
        _ => c.check(
            true,
            "63.2 /km2, 92.7 /km2 and PAR 9.6 NOT desk-reproducible (need a GPW-class raster: FUSEDPNT_GPW_WORLD, FUSEDPNT_GPW_REFERENCE)".into(),
        ),
    }
    c.done()
}

fn grid_geometry() -> Outcome {
    let sc = scenario("reference.scenario");
    let grid = CellGrid::build(sc.grid).unwrap();
    let mut c = Checks::new();
    let n = grid.len() as f64;
    c.check((n / 8.09e5 - 1.0).abs() <= 0.10, format!("N_cells {n:.0} (8.09e5 +/-10%)"));
    c.within("T_sweep", grid.sweep_time() * 1e6, 74.0, 1.0, " us");
    c.done()
}

fn main() -> ExitCode {
    let mut failed = false;
    let mut report = |n: u32, name: &str, o: Outcome| {
        let (tag, detail) = match o {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed = true;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("criterion {n} {tag} {name}: {detail}");
    };
    report(1, "closed-form reproduction", closed_form());
    let d = desk();
    report(2, "desk scheduler/oracle equivalence", d.outcome2);
    report(3, "randomized complexity", d.outcome3);
    report(4, "full-scale smoke", full_scale());
    report(5, "codec", codec());
    report(6, "pointing/steering", pointing());
    report(7, "population properties", population());
    report(8, "grid geometry", grid_geometry());
    if failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
