//! Sparse TX and RX reservation cubes.
//!
//! The TX cube is stored per (SV, beam) lane. A secondary burst ties up the
//! whole beam, so it is kept once per lane and counts against every
//! beam-channel of the beam; per-channel reservations are kept separately.
//! The RX cube stores only each cell's own bursts. Exclude intervals on a
//! cell are the bursts of its neighbours on the same channel and are derived
//! on demand.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::interval::{union_length, Interval};
use super::model::{Assignment, Kind};
use super::timing::TimingParams;
use crate::grid::{CellGrid, CellId};
use crate::orbit::{ConstellationConfig, SvId};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Burst,
    Switch,
    Exclude,
}

/// A reservation refused because of `blocking`. Shifting the requested start
/// forward by `advance` clears this particular blocking interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conflict {
    pub blocking: Interval,
    pub status: Status,
    pub advance: u32,
}

fn conflict(requested: &Interval, blocking: Interval, status: Status, period: u32) -> Conflict {
    Conflict {
        blocking,
        status,
        advance: requested.advance_past(&blocking, period),
    }
}

/// Assignment of frequency channels to beams. Each beam owns
/// `floor(n_bc / n_beams)` consecutive channels (modulo `n_channels`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelPlan {
    pub n_beams: u16,
    pub n_channels: u16,
    pub n_bc: u16,
    per_beam: u16,
}

impl ChannelPlan {
    pub fn new(n_beams: u16, n_channels: u16, n_bc: u16) -> Result<Self> {
        if n_beams == 0 || n_channels == 0 {
            return Err(Error::param("n_beams", "beams and channels must be > 0"));
        }
        let per_beam = n_bc / n_beams;
        if per_beam == 0 {
            return Err(Error::param("n_bc", "fewer beam-channels than beams"));
        }
        if per_beam > n_channels {
            return Err(Error::param("n_bc", "a beam would need more channels than exist"));
        }
        Ok(Self {
            n_beams,
            n_channels,
            n_bc,
            per_beam,
        })
    }

    pub fn from_config(c: &ConstellationConfig) -> Result<Self> {
        Self::new(c.n_beams, c.n_channels, c.n_bc)
    }

    pub fn per_beam(&self) -> u16 {
        self.per_beam
    }

    pub fn channels(&self, beam: u16) -> impl Iterator<Item = u16> + '_ {
        let base = beam as u32 * self.per_beam as u32;
        (0..self.per_beam as u32).map(move |j| ((base + j) % self.n_channels as u32) as u16)
    }

    pub fn contains(&self, beam: u16, channel: u16) -> bool {
        beam < self.n_beams && channel < self.n_channels && self.channels(beam).any(|c| c == channel)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TxKey {
    pub sv_id: SvId,
    pub beam_id: u16,
    pub channel_id: u16,
}

const NO_CELL: CellId = CellId::MAX;

#[derive(Debug, Clone, Copy)]
struct ChanSlot {
    iv: Interval,
    channel: u16,
    status: Status,
    cell: CellId,
}

#[derive(Debug, Clone, Copy)]
struct WideSlot {
    /// Burst plus switching margins.
    iv: Interval,
    burst: Interval,
    cell: CellId,
}

#[derive(Debug, Clone, Default)]
struct BeamLane {
    wide: Vec<WideSlot>,
    chan: Vec<ChanSlot>,
    setup: Vec<Interval>,
}

#[derive(Debug, Clone)]
pub struct TxCube {
    plan: ChannelPlan,
    n_sats: u32,
    period: u32,
    lanes: Vec<BeamLane>,
}

impl TxCube {
    pub fn new(plan: ChannelPlan, n_sats: u32, period_us: u32) -> Self {
        Self {
            plan,
            n_sats,
            period: period_us,
            lanes: alloc::vec![BeamLane::default(); n_sats as usize * plan.n_beams as usize],
        }
    }

    pub fn plan(&self) -> &ChannelPlan {
        &self.plan
    }

    fn lane(&self, sv: SvId, beam: u16) -> &BeamLane {
        &self.lanes[sv as usize * self.plan.n_beams as usize + beam as usize]
    }

    fn lane_mut(&mut self, sv: SvId, beam: u16) -> &mut BeamLane {
        &mut self.lanes[sv as usize * self.plan.n_beams as usize + beam as usize]
    }

    fn assert_key(&self, key: &TxKey) {
        assert!(key.sv_id < self.n_sats, "sv {} outside cube", key.sv_id);
        assert!(
            self.plan.contains(key.beam_id, key.channel_id),
            "channel {} is not carried by beam {}",
            key.channel_id,
            key.beam_id
        );
    }

    /// First reservation on `key` overlapping `iv`.
    fn key_conflict(&self, key: &TxKey, iv: &Interval) -> Option<Conflict> {
        let lane = self.lane(key.sv_id, key.beam_id);
        let p = self.period;
        for w in &lane.wide {
            if w.iv.overlaps(iv, p) {
                return Some(conflict(iv, w.iv, Status::Burst, p));
            }
        }
        for c in &lane.chan {
            if c.channel == key.channel_id && c.iv.overlaps(iv, p) {
                return Some(conflict(iv, c.iv, c.status, p));
            }
        }
        None
    }

    /// Reserves `iv` on a single beam-channel.
    pub fn tx_reserve(&mut self, key: TxKey, iv: Interval, status: Status) -> core::result::Result<(), Conflict> {
        self.assert_key(&key);
        if let Some(c) = self.key_conflict(&key, &iv) {
            return Err(c);
        }
        self.lane_mut(key.sv_id, key.beam_id).chan.push(ChanSlot {
            iv,
            channel: key.channel_id,
            status,
            cell: NO_CELL,
        });
        Ok(())
    }

    /// Checks a primary burst: one beam-channel for `t_burst`, kept clear by
    /// `t_switch_tx` of bursts to other cells on the same beam.
    pub fn check_primary(&self, key: &TxKey, cell: CellId, t: u32, timing: &TimingParams) -> core::result::Result<(), Conflict> {
        self.assert_key(key);
        let p = self.period;
        let burst = Interval::wrapped(t as i64, timing.t_burst_us, p);
        if let Some(c) = self.key_conflict(key, &burst) {
            return Err(c);
        }
        let guard = burst.padded(timing.t_switch_tx_us, timing.t_switch_tx_us, p);
        for c in &self.lane(key.sv_id, key.beam_id).chan {
            if c.status == Status::Burst && c.cell != NO_CELL && c.cell != cell && c.iv.overlaps(&guard, p) {
                return Err(conflict(&guard, c.iv, c.status, p));
            }
        }
        Ok(())
    }

    pub fn reserve_primary(&mut self, key: TxKey, cell: CellId, t: u32, timing: &TimingParams) -> core::result::Result<(), Conflict> {
        self.check_primary(&key, cell, t, timing)?;
        let iv = Interval::wrapped(t as i64, timing.t_burst_us, self.period);
        self.lane_mut(key.sv_id, key.beam_id).chan.push(ChanSlot {
            iv,
            channel: key.channel_id,
            status: Status::Burst,
            cell,
        });
        Ok(())
    }

    /// Window a secondary burst starting at `t` occupies on its whole beam.
    pub fn secondary_window(t: u32, timing: &TimingParams) -> Interval {
        Interval::wrapped(t as i64, timing.t_burst_us, timing.t_period_us).padded(
            timing.t_switch_tx_us,
            timing.t_switch_tx_us,
            timing.t_period_us,
        )
    }

    /// Coefficient set-up span of a secondary burst: set-up, then the forward
    /// switch, then the burst. The switch back needs no set-up.
    pub fn setup_span(t: u32, timing: &TimingParams) -> Interval {
        let len = (timing.t_setup_tx_us as u64 + timing.t_switch_tx_us as u64 + timing.t_burst_us as u64)
            .min(timing.t_period_us as u64) as u32;
        Interval::wrapped(
            t as i64 - timing.t_switch_tx_us as i64 - timing.t_setup_tx_us as i64,
            len,
            timing.t_period_us,
        )
    }

    /// Checks a secondary burst on (`sv`, `beam`): the entire beam is taken for
    /// `t_burst + 2 t_switch_tx`, and the beam must have time to load the new
    /// coefficients since its previous switching event.
    pub fn check_secondary(&self, sv: SvId, beam: u16, t: u32, timing: &TimingParams) -> core::result::Result<(), Conflict> {
        assert!(sv < self.n_sats && beam < self.plan.n_beams);
        let p = self.period;
        let lane = self.lane(sv, beam);
        let win = Self::secondary_window(t, timing);
        for w in &lane.wide {
            if w.iv.overlaps(&win, p) {
                return Err(conflict(&win, w.iv, Status::Burst, p));
            }
        }
        for c in &lane.chan {
            if c.iv.overlaps(&win, p) {
                return Err(conflict(&win, c.iv, c.status, p));
            }
        }
        let span = Self::setup_span(t, timing);
        for s in &lane.setup {
            if s.overlaps(&span, p) {
                return Err(conflict(&span, *s, Status::Switch, p));
            }
        }
        Ok(())
    }

    pub fn reserve_secondary(&mut self, sv: SvId, beam: u16, cell: CellId, t: u32, timing: &TimingParams) -> core::result::Result<(), Conflict> {
        self.check_secondary(sv, beam, t, timing)?;
        let lane = self.lane_mut(sv, beam);
        lane.wide.push(WideSlot {
            iv: Self::secondary_window(t, timing),
            burst: Interval::wrapped(t as i64, timing.t_burst_us, timing.t_period_us),
            cell,
        });
        lane.setup.push(Self::setup_span(t, timing));
        Ok(())
    }

    /// Checks and reserves the TX side of an assignment.
    pub fn reserve_assignment(&mut self, a: &Assignment, timing: &TimingParams) -> core::result::Result<(), Conflict> {
        match a.kind {
            Kind::Primary => self.reserve_primary(
                TxKey {
                    sv_id: a.sv_id,
                    beam_id: a.beam_id,
                    channel_id: a.channel_id,
                },
                a.cell_id,
                a.t_tx_us,
                timing,
            ),
            Kind::Secondary => self.reserve_secondary(a.sv_id, a.beam_id, a.cell_id, a.t_tx_us, timing),
        }
    }

    /// Status-tagged intervals on one beam-channel, sorted by start.
    pub fn key_intervals(&self, key: &TxKey) -> Vec<(Interval, Status)> {
        let lane = self.lane(key.sv_id, key.beam_id);
        let p = self.period;
        let mut out = Vec::new();
        for w in &lane.wide {
            let sw_before = (w.burst.start as i64 - w.iv.start as i64).rem_euclid(p as i64) as u32;
            let sw_after = w.iv.len - w.burst.len - sw_before;
            if sw_before > 0 {
                out.push((Interval { start: w.iv.start, len: sw_before }, Status::Switch));
            }
            out.push((w.burst, Status::Burst));
            if sw_after > 0 {
                out.push((Interval::wrapped(w.burst.end_unwrapped() as i64, sw_after, p), Status::Switch));
            }
        }
        for c in lane.chan.iter().filter(|c| c.channel == key.channel_id) {
            out.push((c.iv, c.status));
        }
        out.sort_by_key(|(iv, _)| iv.start);
        out
    }

    /// Cells served by secondary bursts on one beam with their burst windows.
    pub fn beam_secondaries(&self, sv: SvId, beam: u16) -> Vec<(CellId, Interval)> {
        self.lane(sv, beam).wide.iter().map(|w| (w.cell, w.burst)).collect()
    }

    /// Total reserved time summed over all beam-channels, microseconds.
    pub fn reserved_time(&self) -> u64 {
        let p = self.period;
        let mut total = 0u64;
        for (idx, lane) in self.lanes.iter().enumerate() {
            if lane.wide.is_empty() && lane.chan.is_empty() {
                continue;
            }
            let beam = (idx % self.plan.n_beams as usize) as u16;
            let wide_only = union_length(lane.wide.iter().map(|w| w.iv), p);
            for ch in self.plan.channels(beam) {
                if lane.chan.iter().any(|c| c.channel == ch) {
                    let ivs = lane
                        .wide
                        .iter()
                        .map(|w| w.iv)
                        .chain(lane.chan.iter().filter(|c| c.channel == ch).map(|c| c.iv));
                    total += union_length(ivs, p);
                } else {
                    total += wide_only;
                }
            }
        }
        total
    }

    /// Reserved fraction of the cube, normalised by `n_bc * n_sats * period`.
    pub fn occupancy(&self) -> f64 {
        let volume = self.plan.n_bc as f64 * self.n_sats as f64 * self.period as f64;
        if volume == 0.0 {
            0.0
        } else {
            self.reserved_time() as f64 / volume
        }
    }

    /// Number of set-up events (one per secondary burst).
    pub fn setup_events(&self) -> usize {
        self.lanes.iter().map(|l| l.setup.len()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RxKey {
    pub cell_id: CellId,
    pub channel_id: u16,
}

#[derive(Debug, Clone, Copy)]
struct RxSlot {
    /// Arrival window padded by the sweep time.
    window: Interval,
    raw: Interval,
    margin: u32,
    channel: u16,
    sv: SvId,
}

impl RxSlot {
    fn full(&self, period: u32) -> Interval {
        self.window.padded(self.margin, self.margin, period)
    }
}

#[derive(Debug, Clone, Default)]
struct CellLane {
    own: Vec<RxSlot>,
    setup: Vec<Interval>,
}

#[derive(Debug, Clone)]
pub struct RxCube {
    n_channels: u16,
    period: u32,
    lanes: Vec<CellLane>,
}

impl RxCube {
    pub fn new(n_cells: usize, n_channels: u16, period_us: u32) -> Self {
        Self {
            n_channels,
            period: period_us,
            lanes: alloc::vec![CellLane::default(); n_cells],
        }
    }

    fn slot_for(a: &Assignment, timing: &TimingParams) -> RxSlot {
        RxSlot {
            window: a.rx_window(timing),
            raw: a.rx_raw_window(timing),
            margin: if a.kind == Kind::Secondary { timing.t_switch_rx_us } else { 0 },
            channel: a.channel_id,
            sv: a.sv_id,
        }
    }

    /// Receiver set-up span of a secondary arrival: set-up, forward switch and
    /// the padded arrival window.
    pub fn setup_span(a: &Assignment, timing: &TimingParams) -> Interval {
        let w = a.rx_window(timing);
        let before = timing.t_setup_rx_us as u64 + timing.t_switch_rx_us as u64;
        let len = (before + w.len as u64).min(timing.t_period_us as u64) as u32;
        Interval::wrapped(w.start as i64 - before as i64, len, timing.t_period_us)
    }

    /// Checks the RX side of `a` against the cell's own reservations, the
    /// exclusions its neighbours impose on it, and the exclusions it would
    /// impose on each neighbour.
    pub fn check(&self, grid: &CellGrid, a: &Assignment, timing: &TimingParams) -> core::result::Result<(), Conflict> {
        assert!(a.channel_id < self.n_channels, "channel {} outside cube", a.channel_id);
        let p = self.period;
        let k = a.cell_id;
        let new = Self::slot_for(a, timing);
        let full = new.full(p);
        for s in self.lanes[k as usize].own.iter().filter(|s| s.channel == a.channel_id) {
            if s.sv == new.sv {
                if s.raw.overlaps(&new.raw, p) {
                    return Err(conflict(&new.raw, s.raw, Status::Burst, p));
                }
            } else if s.full(p).overlaps(&full, p) {
                return Err(conflict(&full, s.full(p), Status::Burst, p));
            }
        }
        for &j in grid.neighbors(k) {
            for s in self.lanes[j as usize].own.iter().filter(|s| s.channel == a.channel_id) {
                if s.window.overlaps(&full, p) {
                    return Err(conflict(&full, s.window, Status::Exclude, p));
                }
                if s.full(p).overlaps(&new.window, p) {
                    return Err(conflict(&new.window, s.full(p), Status::Burst, p));
                }
            }
            for &i in grid.neighbors(j) {
                if i == k {
                    continue;
                }
                for s in self.lanes[i as usize].own.iter().filter(|s| s.channel == a.channel_id) {
                    if s.window.overlaps(&new.window, p) {
                        return Err(conflict(&new.window, s.window, Status::Exclude, p));
                    }
                }
            }
        }
        if a.kind == Kind::Secondary {
            let span = Self::setup_span(a, timing);
            for s in &self.lanes[k as usize].setup {
                if s.overlaps(&span, p) {
                    return Err(conflict(&span, *s, Status::Switch, p));
                }
            }
        }
        Ok(())
    }

    pub fn rx_reserve(&mut self, grid: &CellGrid, a: &Assignment, timing: &TimingParams) -> core::result::Result<(), Conflict> {
        self.check(grid, a, timing)?;
        let lane = &mut self.lanes[a.cell_id as usize];
        lane.own.push(Self::slot_for(a, timing));
        if a.kind == Kind::Secondary {
            lane.setup.push(Self::setup_span(a, timing));
        }
        Ok(())
    }

    /// Status-tagged intervals on one (cell, channel) key, sorted by start.
    pub fn key_intervals(&self, grid: &CellGrid, key: &RxKey) -> Vec<(Interval, Status)> {
        let p = self.period;
        let mut out = Vec::new();
        for s in self.lanes[key.cell_id as usize].own.iter().filter(|s| s.channel == key.channel_id) {
            if s.margin > 0 {
                out.push((Interval::wrapped(s.window.start as i64 - s.margin as i64, s.margin, p), Status::Switch));
                out.push((Interval::wrapped(s.window.end_unwrapped() as i64, s.margin, p), Status::Switch));
            }
            out.push((s.window, Status::Burst));
        }
        for &j in grid.neighbors(key.cell_id) {
            for s in self.lanes[j as usize].own.iter().filter(|s| s.channel == key.channel_id) {
                out.push((s.window, Status::Exclude));
            }
        }
        out.sort_by_key(|(iv, _)| iv.start);
        out
    }

    pub fn reserved_time(&self, grid: &CellGrid) -> u64 {
        let p = self.period;
        let mut total = 0u64;
        let mut channels: Vec<u16> = Vec::new();
        for (k, lane) in self.lanes.iter().enumerate() {
            channels.clear();
            channels.extend(lane.own.iter().map(|s| s.channel));
            for &j in grid.neighbors(k as CellId) {
                channels.extend(self.lanes[j as usize].own.iter().map(|s| s.channel));
            }
            channels.sort_unstable();
            channels.dedup();
            for &ch in &channels {
                let own = lane.own.iter().filter(|s| s.channel == ch).map(|s| s.full(p));
                let excl = grid
                    .neighbors(k as CellId)
                    .iter()
                    .flat_map(|&j| self.lanes[j as usize].own.iter())
                    .filter(|s| s.channel == ch)
                    .map(|s| s.window);
                total += union_length(own.chain(excl), p);
            }
        }
        total
    }

    /// Reserved fraction of the cube, normalised by `n_cells * n_channels * period`.
    pub fn occupancy(&self, grid: &CellGrid) -> f64 {
        let volume = self.lanes.len() as f64 * self.n_channels as f64 * self.period as f64;
        if volume == 0.0 {
            0.0
        } else {
            self.reserved_time(grid) as f64 / volume
        }
    }
}
