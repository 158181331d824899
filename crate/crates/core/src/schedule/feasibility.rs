//! Independent feasibility checker.
//!
//! Rebuilds every per-key timeline straight from the assignment list (no
//! reservation cube involved) and reports each violated constraint:
//!
//! 1. every cell receives exactly signals `1..=n`;
//! 2. bursts and TX switching intervals on one beam-channel do not overlap;
//! 3. bursts from one beam to different cells are `t_switch_tx` apart;
//! 4. arrivals on one (cell, channel) do not overlap;
//! 5. arrivals from different SVs on one (cell, channel) are `t_switch_rx` apart;
//! 6. TX switching events on a beam are `t_setup_tx` apart, switch-backs excepted;
//! 7. RX switching events in a cell are `t_setup_rx` apart, switch-backs excepted;
//! 8. arrivals in neighbouring cells on one channel do not overlap.
//!
//! Arrival windows from different SVs are padded by the sweep time. Mutual
//! visibility and time-of-flight consistency are checked when SV states are
//! supplied.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use libm::round;
use serde::{Deserialize, Serialize};

use super::cube::ChannelPlan;
use super::model::{Assignment, GnssSchedule, Kind};
use super::timing::TimingParams;
use crate::grid::{CellGrid, CellId};
use crate::orbit::{flight_time, line_of_sight, ConstellationConfig, SvId, SvState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    /// Field out of range or inconsistent with the primary map.
    Format,
    SignalCount,
    BeamChannelOverlap,
    TxSwitch,
    RxOverlap,
    RxSwitch,
    TxSetup,
    RxSetup,
    NeighborOverlap,
    Visibility,
    FlightTime,
}

impl Rule {
    /// Number of the numbered feasibility constraint, if any.
    pub fn number(&self) -> Option<u8> {
        match self {
            Rule::SignalCount => Some(1),
            Rule::BeamChannelOverlap => Some(2),
            Rule::TxSwitch => Some(3),
            Rule::RxOverlap => Some(4),
            Rule::RxSwitch => Some(5),
            Rule::TxSetup => Some(6),
            Rule::RxSetup => Some(7),
            Rule::NeighborOverlap => Some(8),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: Rule,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub constraint: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sv_id: Option<SvId>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub beam_id: Option<u16>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub channel_id: Option<u16>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub cells: Vec<CellId>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub times_us: Vec<u32>,
    pub detail: String,
}

impl Violation {
    fn new(rule: Rule, detail: String) -> Self {
        Self {
            rule,
            constraint: rule.number(),
            sv_id: None,
            beam_id: None,
            channel_id: None,
            cells: Vec::new(),
            times_us: Vec::new(),
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub n_assignments: usize,
    pub n_cells: usize,
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, rule: Rule) -> usize {
        self.violations.iter().filter(|v| v.rule == rule).count()
    }

    pub fn counts(&self) -> BTreeMap<Rule, usize> {
        let mut m = BTreeMap::new();
        for v in &self.violations {
            *m.entry(v.rule).or_insert(0) += 1;
        }
        m
    }
}

/// A window on the time wheel, `[start, start + len)` modulo `period`.
#[derive(Debug, Clone, Copy)]
struct Win {
    start: u64,
    len: u64,
}

impl Win {
    fn new(start: i64, len: u64, period: u64) -> Self {
        Win {
            start: start.rem_euclid(period as i64) as u64,
            len: len.min(period),
        }
    }
}

fn overlap(a: Win, b: Win, period: u64) -> bool {
    if a.len == 0 || b.len == 0 {
        return false;
    }
    (b.start + period - a.start) % period < a.len || (a.start + period - b.start) % period < b.len
}

/// Circular gap between two windows, zero when they touch or overlap.
fn gap(a: Win, b: Win, period: u64) -> u64 {
    if a.len == 0 || b.len == 0 {
        return period;
    }
    // distance from the end of one to the start of the other, both ways
    let ab = (b.start + period - a.start) % period;
    let ba = (a.start + period - b.start) % period;
    if ab < a.len || ba < b.len {
        return 0;
    }
    (ab - a.len).min(ba - b.len)
}

/// Pairs of windows that overlap or whose circular gap is below `min_gap`.
fn close_pairs(wins: &[Win], period: u64, min_gap: u64) -> Vec<(usize, usize)> {
    let m = wins.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by_key(|&i| (wins[i].start, i));
    let mut pairs = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        let reach = wins[i].start + wins[i].len + min_gap;
        for step in 1..m {
            let j = order[(pos + step) % m];
            let sj = if pos + step >= m { wins[j].start + period } else { wins[j].start };
            if sj >= reach {
                break;
            }
            if overlap(wins[i], wins[j], period) || gap(wins[i], wins[j], period) < min_gap {
                pairs.push((i.min(j), i.max(j)));
            }
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    pairs
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Coeff {
    Home,
    Target(u32),
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: u64,
    target: Coeff,
    /// Switch-back events sort ahead of forward switches at the same instant.
    back: bool,
}

/// Non-exempt switching events closer than `setup` to their predecessor.
/// Returns (predecessor time, event time) for each offending event.
fn setup_violations(mut events: Vec<Event>, period: u64, setup: u64) -> Vec<(u64, u64)> {
    if events.is_empty() {
        return Vec::new();
    }
    events.sort_by_key(|e| (e.time, !e.back));
    let m = events.len();
    let Some(last_back) = (0..m).rev().find(|&i| events[i].back) else {
        return Vec::new();
    };
    // state just after the chosen switch-back: home, with its forward target
    // as the most recent other coefficient set
    let mut prev = (1..=m)
        .map(|k| events[(last_back + m - k) % m])
        .find(|e| !e.back)
        .map_or(Coeff::Home, |e| e.target);
    let mut cur = Coeff::Home;
    let mut out = Vec::new();
    for step in 1..=m {
        let idx = (last_back + step) % m;
        let e = events[idx];
        let before = events[(idx + m - 1) % m];
        let exempt = e.target == prev;
        if !exempt && e.target != cur {
            let dt = (e.time + period - before.time) % period;
            let dt = if m == 1 { period } else { dt };
            if dt < setup {
                out.push((before.time, e.time));
            }
        }
        if e.target != cur {
            prev = cur;
            cur = e.target;
        }
    }
    out
}

pub struct CheckInput<'a> {
    pub schedule: &'a GnssSchedule,
    pub grid: &'a CellGrid,
    pub config: &'a ConstellationConfig,
    pub timing: &'a TimingParams,
    /// SV states at the planning epoch; enables visibility and time-of-flight checks.
    pub states: Option<&'a [SvState]>,
}

pub fn check_feasibility(input: &CheckInput<'_>) -> FeasibilityReport {
    let CheckInput {
        schedule,
        grid,
        config,
        timing,
        states,
    } = *input;
    let p = timing.t_period_us as u64;
    let mut violations = Vec::new();
    let plan = ChannelPlan::from_config(config).ok();
    let n_sats = config.n_sats();
    let sweep_min = grid.sweep_time_us();

    if schedule.t_period_us != timing.t_period_us {
        violations.push(Violation::new(
            Rule::Format,
            format!("schedule period {} us differs from timing period {} us", schedule.t_period_us, timing.t_period_us),
        ));
    }

    // well-formedness; malformed assignments are left out of the timing checks
    let mut ok = vec![true; schedule.assignments.len()];
    for (i, a) in schedule.assignments.iter().enumerate() {
        let mut problems: Vec<String> = Vec::new();
        if a.cell_id as usize >= grid.len() {
            problems.push(format!("cell {} not in grid", a.cell_id));
        }
        if a.sv_id >= n_sats {
            problems.push(format!("sv {} not in constellation", a.sv_id));
        }
        if a.beam_id >= config.n_beams || a.channel_id >= config.n_channels {
            problems.push(format!("beam {} / channel {} out of range", a.beam_id, a.channel_id));
        } else if let Some(plan) = &plan {
            if !plan.contains(a.beam_id, a.channel_id) {
                problems.push(format!("channel {} not carried by beam {}", a.channel_id, a.beam_id));
            }
        }
        if a.t_tx_us as u64 >= p {
            problems.push(format!("t_tx {} us not below the period", a.t_tx_us));
        }
        if a.signal == 0 || a.signal as u32 > timing.n {
            problems.push(format!("signal index {} outside 1..={}", a.signal, timing.n));
        }
        if a.t_sweep_us < sweep_min {
            problems.push(format!("t_sweep {} us shorter than the cell sweep time {} us", a.t_sweep_us, sweep_min));
        }
        let primary = schedule.primary_map.get(&a.cell_id);
        match (a.kind, primary) {
            (Kind::Primary, Some(&sv)) if sv != a.sv_id => {
                problems.push(format!("primary burst from sv {} but cell's primary is sv {}", a.sv_id, sv))
            }
            (Kind::Primary, None) => problems.push(String::from("primary burst to a cell without a primary SV")),
            (Kind::Secondary, Some(&sv)) if sv == a.sv_id => {
                problems.push(format!("secondary burst from the cell's primary sv {}", sv))
            }
            _ => {}
        }
        if !problems.is_empty() {
            let hard = a.cell_id as usize >= grid.len()
                || a.sv_id >= n_sats
                || a.beam_id >= config.n_beams
                || a.channel_id >= config.n_channels
                || a.t_tx_us as u64 >= p;
            if hard {
                ok[i] = false;
            }
            let mut v = Violation::new(Rule::Format, problems.join("; "));
            v.sv_id = Some(a.sv_id);
            v.cells = vec![a.cell_id];
            v.times_us = vec![a.t_tx_us];
            violations.push(v);
        }
    }
    let valid: Vec<usize> = (0..schedule.assignments.len()).filter(|&i| ok[i]).collect();
    let asg = |i: usize| -> &Assignment { &schedule.assignments[i] };

    // 1: signal count per cell
    let mut per_cell: Vec<Vec<u8>> = vec![Vec::new(); grid.len()];
    for &i in &valid {
        per_cell[asg(i).cell_id as usize].push(asg(i).signal);
    }
    for (k, sigs) in per_cell.iter_mut().enumerate() {
        sigs.sort_unstable();
        let expect: Vec<u8> = (1..=timing.n.min(255) as u8).collect();
        if *sigs != expect {
            let mut v = Violation::new(
                Rule::SignalCount,
                format!("cell receives {} bursts with signal indices {:?}, expected 1..={}", sigs.len(), sigs, timing.n),
            );
            v.cells = vec![k as CellId];
            violations.push(v);
        }
    }

    let tx_win = |a: &Assignment| Win::new(a.t_tx_us as i64, timing.t_burst_us as u64, p);
    let arrival = |a: &Assignment| (a.t_tx_us as u64 + a.t_flight_us as u64) % p;
    let rx_raw = |a: &Assignment| Win::new(arrival(a) as i64, timing.t_burst_us as u64, p);
    let rx_pad = |a: &Assignment| Win::new(arrival(a) as i64, timing.t_burst_us as u64 + a.t_sweep_us as u64, p);

    // group by (sv, beam)
    let mut by_beam: BTreeMap<(SvId, u16), Vec<usize>> = BTreeMap::new();
    for &i in &valid {
        by_beam.entry((asg(i).sv_id, asg(i).beam_id)).or_default().push(i);
    }
    let sw_tx = timing.t_switch_tx_us as u64;
    for (&(sv, beam), idx) in &by_beam {
        // 2: bursts and switching intervals on each beam-channel
        #[derive(Clone, Copy)]
        enum Item {
            Burst(u16),
            Switch,
        }
        let mut wins = Vec::new();
        let mut items = Vec::new();
        for &i in idx {
            let a = asg(i);
            wins.push(tx_win(a));
            items.push((Item::Burst(a.channel_id), i));
            if a.kind == Kind::Secondary {
                wins.push(Win::new(a.t_tx_us as i64 - sw_tx as i64, sw_tx, p));
                items.push((Item::Switch, i));
                wins.push(Win::new(a.t_tx_us as i64 + timing.t_burst_us as i64, sw_tx, p));
                items.push((Item::Switch, i));
            }
        }
        for (x, y) in close_pairs(&wins, p, 0) {
            let ((ix, ox), (iy, oy)) = (items[x], items[y]);
            if ox == oy {
                continue;
            }
            let (clash, ch) = match (ix, iy) {
                (Item::Burst(c1), Item::Burst(c2)) => (c1 == c2, Some(c1)),
                (Item::Burst(c), Item::Switch) | (Item::Switch, Item::Burst(c)) => (true, Some(c)),
                (Item::Switch, Item::Switch) => (true, None),
            };
            if clash {
                let mut v = Violation::new(
                    Rule::BeamChannelOverlap,
                    format!("TX intervals overlap on sv {sv} beam {beam}"),
                );
                v.sv_id = Some(sv);
                v.beam_id = Some(beam);
                v.channel_id = ch;
                v.cells = vec![asg(ox).cell_id, asg(oy).cell_id];
                v.times_us = vec![wins[x].start as u32, wins[y].start as u32];
                violations.push(v);
            }
        }

        // 3: bursts to different cells on one beam
        let bursts: Vec<Win> = idx.iter().map(|&i| tx_win(asg(i))).collect();
        for (x, y) in close_pairs(&bursts, p, sw_tx) {
            let (a, b) = (asg(idx[x]), asg(idx[y]));
            if a.cell_id != b.cell_id {
                let mut v = Violation::new(
                    Rule::TxSwitch,
                    format!(
                        "bursts to different cells {} us apart, {} us needed",
                        gap(bursts[x], bursts[y], p),
                        sw_tx
                    ),
                );
                v.sv_id = Some(sv);
                v.beam_id = Some(beam);
                v.cells = vec![a.cell_id, b.cell_id];
                v.times_us = vec![a.t_tx_us, b.t_tx_us];
                violations.push(v);
            }
        }

        // 6: set-up between TX switching events
        let mut events = Vec::new();
        for &i in idx {
            let a = asg(i);
            if a.kind == Kind::Secondary {
                events.push(Event {
                    time: (a.t_tx_us as i64 - sw_tx as i64).rem_euclid(p as i64) as u64,
                    target: Coeff::Target(a.cell_id),
                    back: false,
                });
                events.push(Event {
                    time: (a.t_tx_us as u64 + timing.t_burst_us as u64) % p,
                    target: Coeff::Home,
                    back: true,
                });
            }
        }
        for (t0, t1) in setup_violations(events, p, timing.t_setup_tx_us as u64) {
            let mut v = Violation::new(
                Rule::TxSetup,
                format!("TX switching events {} us apart, {} us set-up needed", (t1 + p - t0) % p, timing.t_setup_tx_us),
            );
            v.sv_id = Some(sv);
            v.beam_id = Some(beam);
            v.times_us = vec![t0 as u32, t1 as u32];
            violations.push(v);
        }
    }

    // group by (cell, channel)
    let mut by_rx: BTreeMap<(CellId, u16), Vec<usize>> = BTreeMap::new();
    for &i in &valid {
        by_rx.entry((asg(i).cell_id, asg(i).channel_id)).or_default().push(i);
    }
    let sw_rx = timing.t_switch_rx_us as u64;
    for (&(cell, ch), idx) in &by_rx {
        let padded: Vec<Win> = idx.iter().map(|&i| rx_pad(asg(i))).collect();
        for (x, y) in close_pairs(&padded, p, sw_rx) {
            let (a, b) = (asg(idx[x]), asg(idx[y]));
            let rule = if a.sv_id == b.sv_id {
                if !overlap(rx_raw(a), rx_raw(b), p) {
                    continue;
                }
                Rule::RxOverlap
            } else if overlap(padded[x], padded[y], p) {
                Rule::RxOverlap
            } else {
                Rule::RxSwitch
            };
            let mut v = Violation::new(rule, format!("arrivals from sv {} and sv {} collide", a.sv_id, b.sv_id));
            v.channel_id = Some(ch);
            v.cells = vec![cell];
            v.times_us = vec![arrival(a) as u32, arrival(b) as u32];
            violations.push(v);
        }
    }

    // 7: RX set-up per cell
    let mut by_cell: Vec<Vec<usize>> = vec![Vec::new(); grid.len()];
    for &i in &valid {
        by_cell[asg(i).cell_id as usize].push(i);
    }
    for (k, idx) in by_cell.iter().enumerate() {
        let mut events = Vec::new();
        for &i in idx {
            let a = asg(i);
            if a.kind == Kind::Secondary {
                let w = rx_pad(a);
                events.push(Event {
                    time: (w.start as i64 - sw_rx as i64).rem_euclid(p as i64) as u64,
                    target: Coeff::Target(a.sv_id),
                    back: false,
                });
                events.push(Event {
                    time: (w.start + w.len) % p,
                    target: Coeff::Home,
                    back: true,
                });
            }
        }
        for (t0, t1) in setup_violations(events, p, timing.t_setup_rx_us as u64) {
            let mut v = Violation::new(
                Rule::RxSetup,
                format!("RX switching events {} us apart, {} us set-up needed", (t1 + p - t0) % p, timing.t_setup_rx_us),
            );
            v.cells = vec![k as CellId];
            v.times_us = vec![t0 as u32, t1 as u32];
            violations.push(v);
        }
    }

    // 8: neighbouring cells, same channel
    for k in 0..grid.len() {
        for &j in grid.neighbors(k as CellId) {
            if (j as usize) <= k {
                continue;
            }
            for &x in &by_cell[k] {
                for &y in &by_cell[j as usize] {
                    let (a, b) = (asg(x), asg(y));
                    if a.channel_id == b.channel_id && overlap(rx_pad(a), rx_pad(b), p) {
                        let mut v = Violation::new(
                            Rule::NeighborOverlap,
                            format!("neighbouring cells receive overlapping bursts on channel {}", a.channel_id),
                        );
                        v.channel_id = Some(a.channel_id);
                        v.cells = vec![a.cell_id, b.cell_id];
                        v.times_us = vec![arrival(a) as u32, arrival(b) as u32];
                        violations.push(v);
                    }
                }
            }
        }
    }

    // mutual visibility and time of flight
    if let Some(states) = states {
        let mut lookup: BTreeMap<SvId, &SvState> = BTreeMap::new();
        for s in states {
            lookup.insert(s.sv_id, s);
        }
        let params = grid.params();
        for &i in &valid {
            let a = asg(i);
            let cell = grid.cell(a.cell_id);
            let Some(sv) = lookup.get(&a.sv_id) else {
                let mut v = Violation::new(Rule::Visibility, format!("no state for sv {}", a.sv_id));
                v.sv_id = Some(a.sv_id);
                violations.push(v);
                continue;
            };
            let los = line_of_sight(sv, &cell.center, params, config.geo_mask_deg);
            if let Some(why) = los.excluded {
                let mut v = Violation::new(
                    Rule::Visibility,
                    format!("sv at elevation {:.3} deg is excluded ({:?})", los.elevation_deg, why),
                );
                v.sv_id = Some(a.sv_id);
                v.cells = vec![a.cell_id];
                violations.push(v);
                continue;
            }
            if let Ok(tf) = flight_time(sv, cell, params) {
                let expect = round(tf * 1e6) as i64;
                if (expect - a.t_flight_us as i64).abs() > 1 {
                    let mut v = Violation::new(
                        Rule::FlightTime,
                        format!("t_flight {} us, geometry gives {} us", a.t_flight_us, expect),
                    );
                    v.sv_id = Some(a.sv_id);
                    v.cells = vec![a.cell_id];
                    violations.push(v);
                }
            }
        }
    }

    FeasibilityReport {
        n_assignments: schedule.assignments.len(),
        n_cells: grid.len(),
        violations,
    }
}
