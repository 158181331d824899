use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::interval::Interval;
use super::timing::TimingParams;
use crate::grid::CellId;
use crate::orbit::SvId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    /// Burst from the SV that serves the cell with broadband.
    Primary,
    /// Cross-cell burst from any other SV.
    Secondary,
}

/// One ranging burst: `sv_id` transmits on (`beam_id`, `channel_id`) toward
/// `cell_id` at `t_tx_us` modulo the period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub cell_id: CellId,
    /// Signal index, 1-based.
    pub signal: u8,
    pub sv_id: SvId,
    pub beam_id: u16,
    pub channel_id: u16,
    pub t_tx_us: u32,
    pub t_flight_us: u32,
    pub t_sweep_us: u32,
    pub kind: Kind,
}

impl Assignment {
    /// Transmit window at the SV.
    pub fn tx_window(&self, timing: &TimingParams) -> Interval {
        Interval::wrapped(self.t_tx_us as i64, timing.t_burst_us, timing.t_period_us)
    }

    /// Arrival time of the leading edge, modulo the period.
    pub fn arrival_us(&self, timing: &TimingParams) -> u32 {
        ((self.t_tx_us as u64 + self.t_flight_us as u64) % timing.t_period_us as u64) as u32
    }

    /// Arrival window without sweep padding.
    pub fn rx_raw_window(&self, timing: &TimingParams) -> Interval {
        Interval::wrapped(self.arrival_us(timing) as i64, timing.t_burst_us, timing.t_period_us)
    }

    /// Arrival window padded by the sweep time, covering every viewpoint in the cell.
    pub fn rx_window(&self, timing: &TimingParams) -> Interval {
        let len = (timing.t_burst_us as u64 + self.t_sweep_us as u64).min(timing.t_period_us as u64) as u32;
        Interval::wrapped(self.arrival_us(timing) as i64, len, timing.t_period_us)
    }

    /// Fields carried in the uplinked 59-bit word.
    pub fn tuple(&self) -> Tuple {
        Tuple {
            sv_id: self.sv_id,
            beam_id: self.beam_id,
            channel_id: self.channel_id,
            t_tx_us: self.t_tx_us,
            t_flight_us: self.t_flight_us,
            t_sweep_us: self.t_sweep_us,
        }
    }
}

/// The part of an assignment carried by the codec. The cell and signal index
/// are implied by where the tuple is delivered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Tuple {
    pub sv_id: SvId,
    pub beam_id: u16,
    pub channel_id: u16,
    pub t_tx_us: u32,
    pub t_flight_us: u32,
    pub t_sweep_us: u32,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GnssSchedule {
    pub t_period_us: u32,
    pub assignments: Vec<Assignment>,
    /// Broadband-serving SV of each cell.
    pub primary_map: BTreeMap<CellId, SvId>,
}

impl GnssSchedule {
    pub fn new(t_period_us: u32) -> Self {
        Self {
            t_period_us,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn count_kind(&self, kind: Kind) -> usize {
        self.assignments.iter().filter(|a| a.kind == kind).count()
    }

    /// Assignments grouped by cell, in ascending cell order.
    pub fn by_cell(&self) -> BTreeMap<CellId, Vec<&Assignment>> {
        let mut m: BTreeMap<CellId, Vec<&Assignment>> = BTreeMap::new();
        for a in &self.assignments {
            m.entry(a.cell_id).or_default().push(a);
        }
        m
    }
}
