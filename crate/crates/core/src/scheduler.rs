//! Greedy goal-direction scheduler and rejection-sampling scheduler.

use alloc::vec::Vec;

use libm::{floor, round};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::grid::{CellGrid, CellId};
use crate::orbit::{flight_time, propagate, rank_by_goals, ConstellationConfig, LineOfSight, SvId, SvState, VisibilityIndex};
use crate::schedule::{Assignment, ChannelPlan, Conflict, GnssSchedule, Kind, RxCube, TimingParams, TxCube, TxKey};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Greedy,
    Randomized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellOrder {
    /// Ascending cell id.
    Id,
    /// Seeded shuffle.
    Random,
    /// Column-major sweep: 1-degree longitude strips, south to north within a strip.
    Geo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchedulerConfig {
    pub mode: Mode,
    pub rng_seed: u64,
    pub max_attempts_per_signal: u32,
    /// Propagation instant for visibility and time of flight, seconds.
    pub epoch_s: f64,
    pub order: CellOrder,
    /// Elevation of the four side goal directions.
    pub goal_elevation_deg: f64,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Greedy,
            rng_seed: 0,
            max_attempts_per_signal: 1000,
            epoch_s: 0.0,
            order: CellOrder::Id,
            goal_elevation_deg: 0.0,
        }
    }
}

impl SchedulerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_attempts_per_signal == 0 {
            return Err(Error::param("max_attempts_per_signal", "must be >= 1"));
        }
        if !(0.0..90.0).contains(&self.goal_elevation_deg) {
            return Err(Error::param("goal_elevation_deg", "must lie in [0, 90)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScheduleStats {
    /// Placement attempts: candidate (SV, beam, channel, time) tuples tested.
    pub total_steps: u64,
    pub conflicts_tx: u64,
    pub conflicts_rx: u64,
    /// Cells that did not receive all `n` signals.
    pub cells_failed: Vec<CellId>,
    /// Subset of `cells_failed` with fewer than `n` usable SVs in view.
    pub cells_without_visibility: Vec<CellId>,
    /// Filled in by callers that time the run.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_time_s: Option<f64>,
}

impl ScheduleStats {
    pub fn succeeded(&self) -> bool {
        self.cells_failed.is_empty()
    }
}

/// A schedule together with the cubes it was built in.
#[derive(Debug, Clone)]
pub struct ScheduleRun {
    pub schedule: GnssSchedule,
    pub stats: ScheduleStats,
    pub tx: TxCube,
    pub rx: RxCube,
    pub states: Vec<SvState>,
}

/// Expected sampling steps for the randomized scheduler,
/// `n N_cells / (1 - 2 R_TX - 2 R_RX)`.
pub fn complexity_bound(n: u32, n_cells: usize, r_tx: f64, r_rx: f64) -> Result<f64> {
    let denom = 1.0 - 2.0 * r_tx - 2.0 * r_rx;
    if !(denom > 0.0) {
        return Err(Error::Saturation(alloc::format!(
            "2 R_TX + 2 R_RX = {:.4} leaves no acceptance probability",
            2.0 * r_tx + 2.0 * r_rx
        )));
    }
    Ok(n as f64 * n_cells as f64 / denom)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn cell_order(grid: &CellGrid, order: CellOrder, rng: &mut ChaCha8Rng) -> Vec<CellId> {
    let mut ids: Vec<CellId> = (0..grid.len() as CellId).collect();
    match order {
        CellOrder::Id => {}
        CellOrder::Random => ids.shuffle(rng),
        CellOrder::Geo => {
            let key = |id: &CellId| {
                let c = &grid.cell(*id).center;
                (floor(c.lon_deg + 180.0) as i64, (c.lat_deg * 1e6) as i64, *id)
            };
            ids.sort_by_key(key);
        }
    }
    ids
}

struct Ctx<'a> {
    grid: &'a CellGrid,
    timing: &'a TimingParams,
    plan: ChannelPlan,
    sweep_us: u32,
    tx: TxCube,
    rx: RxCube,
    stats: ScheduleStats,
}

impl Ctx<'_> {
    #[allow(clippy::too_many_arguments)]
    fn assignment(&self, cell: CellId, signal: u8, sv: SvId, beam: u16, ch: u16, t: u32, tf: u32, kind: Kind) -> Assignment {
        Assignment {
            cell_id: cell,
            signal,
            sv_id: sv,
            beam_id: beam,
            channel_id: ch,
            t_tx_us: t,
            t_flight_us: tf,
            t_sweep_us: self.sweep_us,
            kind,
        }
    }

    fn check_tx(&self, a: &Assignment) -> core::result::Result<(), Conflict> {
        match a.kind {
            Kind::Primary => self.tx.check_primary(
                &TxKey {
                    sv_id: a.sv_id,
                    beam_id: a.beam_id,
                    channel_id: a.channel_id,
                },
                a.cell_id,
                a.t_tx_us,
                self.timing,
            ),
            Kind::Secondary => self.tx.check_secondary(a.sv_id, a.beam_id, a.t_tx_us, self.timing),
        }
    }

    fn commit(&mut self, a: &Assignment) {
        let tx = self.tx.reserve_assignment(a, self.timing);
        let rx = self.rx.rx_reserve(self.grid, a, self.timing);
        debug_assert!(tx.is_ok() && rx.is_ok());
    }

    /// One placement attempt; on conflict returns how far to advance in time.
    fn attempt(&mut self, a: &Assignment) -> core::result::Result<(), u32> {
        self.stats.total_steps += 1;
        if let Err(c) = self.check_tx(a) {
            self.stats.conflicts_tx += 1;
            return Err(c.advance);
        }
        if let Err(c) = self.rx.check(self.grid, a, self.timing) {
            self.stats.conflicts_rx += 1;
            return Err(c.advance);
        }
        self.commit(a);
        Ok(())
    }

    /// Earliest-fit scan of the time wheel from `offset` over the beams and
    /// channels of `sv`, lowest index first.
    fn place_greedy(&mut self, cell: CellId, signal: u8, sv: SvId, tf: u32, kind: Kind, offset: u32) -> Option<Assignment> {
        let period = self.timing.t_period_us;
        for beam in 0..self.plan.n_beams {
            let channels: Vec<u16> = self.plan.channels(beam).collect();
            match kind {
                Kind::Primary => {
                    for &ch in &channels {
                        let mut t = offset;
                        let mut travelled = 0u64;
                        while travelled < period as u64 {
                            let a = self.assignment(cell, signal, sv, beam, ch, t, tf, kind);
                            match self.attempt(&a) {
                                Ok(()) => return Some(a),
                                Err(adv) => {
                                    travelled += adv as u64;
                                    t = ((t as u64 + adv as u64) % period as u64) as u32;
                                }
                            }
                        }
                    }
                }
                Kind::Secondary => {
                    let mut t = offset;
                    let mut travelled = 0u64;
                    while travelled < period as u64 {
                        let probe = self.assignment(cell, signal, sv, beam, channels[0], t, tf, kind);
                        let adv = match self.check_tx(&probe) {
                            Err(c) => {
                                self.stats.total_steps += 1;
                                self.stats.conflicts_tx += 1;
                                c.advance
                            }
                            Ok(()) => {
                                let mut best = u32::MAX;
                                let mut placed = None;
                                for &ch in &channels {
                                    let a = self.assignment(cell, signal, sv, beam, ch, t, tf, kind);
                                    match self.attempt(&a) {
                                        Ok(()) => {
                                            placed = Some(a);
                                            break;
                                        }
                                        Err(adv) => best = best.min(adv),
                                    }
                                }
                                if placed.is_some() {
                                    return placed;
                                }
                                best
                            }
                        };
                        travelled += adv as u64;
                        t = ((t as u64 + adv as u64) % period as u64) as u32;
                    }
                }
            }
        }
        None
    }
}

struct CellView {
    usable: Vec<LineOfSight>,
    primary: SvId,
}

fn usable_svs(
    index: &VisibilityIndex,
    states: &[SvState],
    grid: &CellGrid,
    config: &ConstellationConfig,
    cell: CellId,
) -> Option<CellView> {
    let mut usable: Vec<LineOfSight> = index
        .visible_from(states, grid.cell(cell), grid.params(), config.geo_mask_deg)
        .into_iter()
        .filter(|l| !l.is_excluded())
        .collect();
    usable.sort_by_key(|l| l.sv_id);
    let primary = usable
        .iter()
        .max_by(|a, b| a.elevation_deg.total_cmp(&b.elevation_deg).then(b.sv_id.cmp(&a.sv_id)))?
        .sv_id;
    Some(CellView { usable, primary })
}

fn flight_us(states: &[SvState], grid: &CellGrid, sv: SvId, cell: CellId) -> Option<u32> {
    flight_time(&states[sv as usize], grid.cell(cell), grid.params())
        .ok()
        .map(|t| round(t * 1e6) as u32)
}

/// Builds a schedule with the configured mode.
pub fn schedule(
    grid: &CellGrid,
    config: &ConstellationConfig,
    timing: &TimingParams,
    sched: &SchedulerConfig,
) -> Result<ScheduleRun> {
    config.validate()?;
    if timing.n == 0 {
        timing.validate()?;
    } else {
        timing.validate_for_scheduling()?;
    }
    sched.validate()?;
    let plan = ChannelPlan::from_config(config)?;
    let states = propagate(config, grid.params().earth_radius_km, sched.epoch_s);
    let index = VisibilityIndex::new(&states, config, grid.params());
    let mut rng = ChaCha8Rng::seed_from_u64(sched.rng_seed);
    let order = cell_order(grid, sched.order, &mut rng);
    let n = timing.n as usize;

    let mut ctx = Ctx {
        grid,
        timing,
        plan,
        sweep_us: grid.sweep_time_us(),
        tx: TxCube::new(plan, config.n_sats(), timing.t_period_us),
        rx: RxCube::new(grid.len(), config.n_channels, timing.t_period_us),
        stats: ScheduleStats::default(),
    };
    let mut out = GnssSchedule::new(timing.t_period_us);

    for &cell in order.iter().filter(|_| n > 0) {
        let view = match usable_svs(&index, &states, grid, config, cell) {
            Some(v) if v.usable.len() >= n => v,
            _ => {
                ctx.stats.cells_failed.push(cell);
                ctx.stats.cells_without_visibility.push(cell);
                continue;
            }
        };
        out.primary_map.insert(cell, view.primary);
        let mut used: Vec<SvId> = Vec::with_capacity(n);
        let mut complete = true;
        match sched.mode {
            Mode::Greedy => {
                let ranks = rank_by_goals(&view.usable, n, sched.goal_elevation_deg, cell)?;
                let base = splitmix(cell as u64 ^ sched.rng_seed.rotate_left(32));
                for (s, rank) in ranks.iter().enumerate() {
                    let signal = (s + 1) as u8;
                    let offset = ((base % timing.t_period_us as u64 + s as u64 * timing.t_period_us as u64 / n as u64)
                        % timing.t_period_us as u64) as u32;
                    let mut placed = false;
                    for &sv in rank.iter().filter(|sv| !used.contains(sv)) {
                        let Some(tf) = flight_us(&states, grid, sv, cell) else { continue };
                        let kind = if sv == view.primary { Kind::Primary } else { Kind::Secondary };
                        if let Some(a) = ctx.place_greedy(cell, signal, sv, tf, kind, offset) {
                            out.assignments.push(a);
                            used.push(sv);
                            placed = true;
                            break;
                        }
                    }
                    if !placed {
                        complete = false;
                        break;
                    }
                }
            }
            Mode::Randomized => {
                for s in 0..n {
                    let signal = (s + 1) as u8;
                    let candidates: Vec<SvId> = if s == 0 {
                        alloc::vec![view.primary]
                    } else {
                        view.usable
                            .iter()
                            .map(|l| l.sv_id)
                            .filter(|sv| *sv != view.primary && !used.contains(sv))
                            .collect()
                    };
                    let mut placed = false;
                    for _ in 0..sched.max_attempts_per_signal {
                        let sv = candidates[rng.gen_range(0..candidates.len())];
                        let beam = rng.gen_range(0..plan.n_beams);
                        let ch = plan.channels(beam).nth(rng.gen_range(0..plan.per_beam() as usize)).unwrap_or(0);
                        let t = rng.gen_range(0..timing.t_period_us);
                        let Some(tf) = flight_us(&states, grid, sv, cell) else { continue };
                        let kind = if sv == view.primary { Kind::Primary } else { Kind::Secondary };
                        let a = ctx.assignment(cell, signal, sv, beam, ch, t, tf, kind);
                        if ctx.attempt(&a).is_ok() {
                            out.assignments.push(a);
                            used.push(sv);
                            placed = true;
                            break;
                        }
                    }
                    if !placed {
                        complete = false;
                        break;
                    }
                }
            }
        }
        if !complete {
            ctx.stats.cells_failed.push(cell);
        }
    }
    ctx.stats.cells_failed.sort_unstable();
    ctx.stats.cells_without_visibility.sort_unstable();

    Ok(ScheduleRun {
        schedule: out,
        stats: ctx.stats,
        tx: ctx.tx,
        rx: ctx.rx,
        states,
    })
}

pub fn greedy_schedule(
    grid: &CellGrid,
    config: &ConstellationConfig,
    timing: &TimingParams,
    sched: &SchedulerConfig,
) -> Result<ScheduleRun> {
    schedule(grid, config, timing, &SchedulerConfig { mode: Mode::Greedy, ..*sched })
}

pub fn randomized_schedule(
    grid: &CellGrid,
    config: &ConstellationConfig,
    timing: &TimingParams,
    sched: &SchedulerConfig,
) -> Result<ScheduleRun> {
    schedule(grid, config, timing, &SchedulerConfig { mode: Mode::Randomized, ..*sched })
}
