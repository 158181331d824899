//! Closed-form reservations and costs, and their measured counterparts.

use alloc::format;

use libm::sqrt;
use serde::{Deserialize, Serialize};

use crate::grid::{sweep_time, CellGrid, GridParams};
use crate::schedule::{GnssSchedule, Kind, RxCube, TimingParams, TxCube};
use crate::scheduler::complexity_bound;
use crate::{Error, Result};

/// Throughput change per dB of SNR at high SNR: log2(10) / 10 b/s/Hz.
pub const HIGH_SNR_SENSITIVITY: f64 = 0.332;

const MIB: f64 = 1024.0 * 1024.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UplinkParams {
    /// Interval between schedule uploads to each SV.
    pub refresh_interval_s: f64,
    /// Precise orbit and clock correction stream.
    pub corrections_bps: f64,
    /// Ionospheric model coefficients.
    pub ionosphere_bps: f64,
    /// Optional broadcast-ephemeris stream for bit wipe-off.
    pub ephemeris_bps: f64,
}

impl Default for UplinkParams {
    fn default() -> Self {
        Self {
            refresh_interval_s: 15.0,
            corrections_bps: 600.0,
            ionosphere_bps: 3.4,
            ephemeris_bps: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostParams {
    pub timing: TimingParams,
    pub n_cells: u64,
    pub n_adj: u32,
    pub t_sweep_us: f64,
    pub n_sats: u32,
    pub n_beams: u32,
    pub n_channels: u32,
    pub n_bc: u32,
    /// Transmitter peak-to-average power ratio.
    pub par: f64,
    pub channel_bandwidth_hz: f64,
    /// b/s/Hz; with 50 MHz the default gives 114.5 Mb/s per channel.
    pub spectral_efficiency: f64,
    pub assignment_bits: u32,
    pub fwhm_deg: f64,
    /// Largest line-of-sight angular rate seen by an SV beam.
    pub omega_deg_s: f64,
    /// Throughput budget for pointing losses between steering events.
    pub pointing_throughput_budget: f64,
    pub uplink: UplinkParams,
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            timing: TimingParams::default(),
            n_cells: 850_000,
            n_adj: 6,
            t_sweep_us: sweep_time(&GridParams::default()) * 1e6,
            n_sats: 10_000,
            n_beams: 15,
            n_channels: 76,
            n_bc: 264,
            par: 9.6,
            channel_bandwidth_hz: 50e6,
            spectral_efficiency: 2.29,
            assignment_bits: 59,
            fwhm_deg: 2.0,
            omega_deg_s: 0.73,
            pointing_throughput_budget: 0.001,
            uplink: UplinkParams::default(),
        }
    }
}

impl CostParams {
    /// Takes cell count, neighbour count and sweep time from a built grid.
    pub fn with_grid(mut self, grid: &CellGrid) -> Self {
        self.n_cells = grid.len() as u64;
        self.n_adj = grid.max_neighbors() as u32;
        self.t_sweep_us = grid.sweep_time() * 1e6;
        self
    }

    /// Like [`CostParams::with_grid`], but with the sweep time rounded up to
    /// the whole microseconds a schedule reserves. Use this to compare
    /// measured occupancy against the bounds.
    pub fn for_schedule(self, grid: &CellGrid) -> Self {
        let mut p = self.with_grid(grid);
        p.t_sweep_us = grid.sweep_time_us() as f64;
        p
    }

    pub fn validate(&self) -> Result<()> {
        self.timing.validate()?;
        let positive = [
            ("n_sats", self.n_sats as f64),
            ("n_beams", self.n_beams as f64),
            ("n_channels", self.n_channels as f64),
            ("n_bc", self.n_bc as f64),
            ("par", self.par),
            ("channel_bandwidth_hz", self.channel_bandwidth_hz),
            ("spectral_efficiency", self.spectral_efficiency),
            ("fwhm_deg", self.fwhm_deg),
            ("omega_deg_s", self.omega_deg_s),
            ("refresh_interval_s", self.uplink.refresh_interval_s),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::param(name, "must be positive and finite"));
            }
        }
        if !(self.t_sweep_us >= 0.0) {
            return Err(Error::param("t_sweep_us", "must be >= 0"));
        }
        if !(self.pointing_throughput_budget >= 0.0) {
            return Err(Error::param("pointing_throughput_budget", "must be >= 0"));
        }
        Ok(())
    }

    pub fn channel_rate_bps(&self) -> f64 {
        self.channel_bandwidth_hz * self.spectral_efficiency
    }

    fn n(&self) -> f64 {
        self.timing.n as f64
    }

    fn us(v: u32) -> f64 {
        v as f64
    }

    fn period_us(&self) -> f64 {
        self.timing.t_period_us as f64
    }
}

fn fraction(name: &str, v: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Saturation(format!("{name} = {v:.6} lies outside [0, 1]")));
    }
    Ok(v)
}

/// TX reservation bound:
/// `N_cells [T_burst + (n-1)(T_burst + 2 T_switch) N_bc / N_beams] / (N_bc N_sats T_period)`.
pub fn tx_reservation_bound(p: &CostParams) -> Result<f64> {
    if p.timing.n == 0 {
        return Ok(0.0);
    }
    let t = &p.timing;
    let per_cell = CostParams::us(t.t_burst_us)
        + (p.n() - 1.0)
            * (CostParams::us(t.t_burst_us) + 2.0 * CostParams::us(t.t_switch_tx_us))
            * p.n_bc as f64
            / p.n_beams as f64;
    fraction(
        "R_TX",
        p.n_cells as f64 * per_cell / (p.n_bc as f64 * p.n_sats as f64 * p.period_us()),
    )
}

/// RX reservation bound:
/// `[n (N_adj + 1)(T_burst + T_sweep) + 2 (n-1) T_switch] / (N_channels T_period)`.
pub fn rx_reservation_bound(p: &CostParams) -> Result<f64> {
    if p.timing.n == 0 {
        return Ok(0.0);
    }
    let t = &p.timing;
    let num = p.n() * (p.n_adj as f64 + 1.0) * (CostParams::us(t.t_burst_us) + p.t_sweep_us)
        + 2.0 * (p.n() - 1.0) * CostParams::us(t.t_switch_rx_us);
    fraction("R_RX", num / (p.n_channels as f64 * p.period_us()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DownlinkCapacity {
    /// Channels' worth of simultaneous transmission.
    pub channels: f64,
    pub bps: f64,
}

/// Downlink capacity, `min(V_TX, V_RX) / T_period`, optionally net of the
/// TX and RX reservations.
pub fn downlink_capacity(p: &CostParams, with_fusion: bool) -> Result<DownlinkCapacity> {
    let v_tx = p.n_bc as f64 * p.n_sats as f64;
    let v_rx = p.n_cells as f64 * p.n_channels as f64;
    let channels = if with_fusion {
        let r_tx = tx_reservation_bound(p)?;
        let r_rx = rx_reservation_bound(p)?;
        (v_tx * (1.0 - r_tx)).min(v_rx * (1.0 - r_rx))
    } else {
        v_tx.min(v_rx)
    };
    Ok(DownlinkCapacity {
        channels,
        bps: channels * p.channel_rate_bps(),
    })
}

/// Mean downlink reservation `(before - after) / before`.
pub fn downlink_reservation(p: &CostParams) -> Result<f64> {
    let before = downlink_capacity(p, false)?;
    let after = downlink_capacity(p, true)?;
    if before.channels == 0.0 {
        return Ok(0.0);
    }
    fraction("R_DL", (before.channels - after.channels) / before.channels)
}

/// Absolute downlink loss per cell, bits per second.
pub fn per_cell_loss_bps(p: &CostParams) -> Result<f64> {
    if p.n_cells == 0 {
        return Ok(0.0);
    }
    let before = downlink_capacity(p, false)?;
    let after = downlink_capacity(p, true)?;
    Ok((before.bps - after.bps) / p.n_cells as f64)
}

/// Mean set-up reservation `(n-1) N_cells T_setup / (N_beams N_sats T_period)`.
pub fn setup_reservation(p: &CostParams) -> Result<f64> {
    let secondaries = (p.n() - 1.0).max(0.0) * p.n_cells as f64;
    fraction(
        "R_SU",
        secondaries * CostParams::us(p.timing.t_setup_tx_us) / (p.n_beams as f64 * p.n_sats as f64 * p.period_us()),
    )
}

/// Mean energy reservation `n N_cells T_burst PAR / (T_period N_sats N_bc)`.
pub fn energy_reservation(p: &CostParams) -> Result<f64> {
    fraction(
        "R_E",
        p.n() * p.n_cells as f64 * CostParams::us(p.timing.t_burst_us) * p.par
            / (p.period_us() * p.n_sats as f64 * p.n_bc as f64),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossStatistic {
    /// Budget applies to the largest pointing loss between steering events.
    Max,
    /// Budget applies to the time-averaged pointing loss.
    Mean,
}

/// Gaussian-beam pointing loss, `12 dB (dtheta / FWHM)^2`.
pub fn pointing_loss_db(delta_theta_deg: f64, fwhm_deg: f64) -> f64 {
    let x = delta_theta_deg / fwhm_deg;
    12.0 * x * x
}

/// Longest interval between steering events keeping the pointing loss within
/// `budget_db`: `(FWHM / omega) sqrt(L / 3 dB)` for the maximum,
/// `(FWHM / omega) sqrt(L / 1 dB)` for the mean.
pub fn max_steer_interval(fwhm_deg: f64, omega_deg_s: f64, budget_db: f64, stat: LossStatistic) -> Result<f64> {
    if !(fwhm_deg > 0.0 && omega_deg_s > 0.0) {
        return Err(Error::param("omega_deg_s", "FWHM and angular rate must be positive"));
    }
    if !(budget_db >= 0.0) {
        return Err(Error::param("budget_db", "must be >= 0"));
    }
    let denom = match stat {
        LossStatistic::Max => 3.0,
        LossStatistic::Mean => 1.0,
    };
    Ok(fwhm_deg / omega_deg_s * sqrt(budget_db / denom))
}

/// SNR loss (dB) that costs `throughput_fraction` of a link running at
/// `spectral_efficiency`, via the high-SNR sensitivity.
pub fn throughput_loss_to_db(throughput_fraction: f64, spectral_efficiency: f64) -> f64 {
    throughput_fraction * spectral_efficiency / HIGH_SNR_SENSITIVITY
}

pub fn db_to_throughput_loss(loss_db: f64, spectral_efficiency: f64) -> f64 {
    loss_db * HIGH_SNR_SENSITIVITY / spectral_efficiency
}

/// Steering interval for the configured mean throughput budget.
pub fn steer_interval_for_budget(p: &CostParams) -> Result<f64> {
    let db = throughput_loss_to_db(p.pointing_throughput_budget, p.spectral_efficiency);
    max_steer_interval(p.fwhm_deg, p.omega_deg_s, db, LossStatistic::Mean)
}

/// Approximate throughput loss from link-maintenance steering updates that
/// are delayed because the array is busy loading ranging coefficients.
///
/// A fraction `R_SU` of set-up slots is taken; a displaced update waits on
/// average `T_setup / 2`, during which the beam sits at the end-of-interval
/// pointing error.
pub fn displaced_steering_loss(p: &CostParams) -> Result<f64> {
    let r_su = setup_reservation(p)?;
    let t_steer = steer_interval_for_budget(p)?;
    if t_steer == 0.0 {
        return Ok(0.0);
    }
    let edge_db = pointing_loss_db(p.omega_deg_s * t_steer / 2.0, p.fwhm_deg);
    let wait_s = p.timing.t_setup_tx_us as f64 * 1e-6 / 2.0;
    let added_db = r_su * edge_db * wait_s / t_steer;
    Ok(db_to_throughput_loss(added_db, p.spectral_efficiency))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UplinkCost {
    /// Total assignment volume per schedule, bits.
    pub total_bits: f64,
    pub total_bytes: f64,
    pub total_mib: f64,
    /// Mean assignment bits delivered to each SV per schedule.
    pub per_sv_bits: f64,
    /// Schedule refresh plus correction streams, bits per second per SV.
    pub per_sv_bps: f64,
}

/// Assignment uplink cost `(2n - 1) N_cells * bits`, plus the per-SV rate.
pub fn cnc_uplink_cost(p: &CostParams) -> Result<UplinkCost> {
    let copies = (2.0 * p.n() - 1.0).max(0.0);
    let total_bits = copies * p.n_cells as f64 * p.assignment_bits as f64;
    let per_sv_bits = total_bits / p.n_sats as f64;
    let u = &p.uplink;
    let per_sv_bps = per_sv_bits / u.refresh_interval_s + u.corrections_bps + u.ionosphere_bps + u.ephemeris_bps;
    Ok(UplinkCost {
        total_bits,
        total_bytes: total_bits / 8.0,
        total_mib: total_bits / 8.0 / MIB,
        per_sv_bits,
        per_sv_bps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtDuty {
    /// Receive time spent on ranging by a UT using the service.
    pub d_pnt: f64,
    /// Bound on one UT's downlink duty cycle, `1 - R_RX`.
    pub d_dl_max: f64,
    /// Bound on the mean downlink duty cycle, `1 - R_DL`.
    pub d_dl_mean_max: f64,
    /// Bound on the uplink duty cycle of a UT using the service, `1 - d_PNT`.
    pub d_ul_max: f64,
}

/// `d_PNT = [n T_burst + 2 (n-1) T_switch_rx] / T_period`.
pub fn ut_duty_cost(timing: &TimingParams) -> Result<f64> {
    if timing.n == 0 {
        return Ok(0.0);
    }
    let n = timing.n as f64;
    fraction(
        "d_PNT",
        (n * timing.t_burst_us as f64 + 2.0 * (n - 1.0) * timing.t_switch_rx_us as f64) / timing.t_period_us as f64,
    )
}

pub fn ut_duty(p: &CostParams) -> Result<UtDuty> {
    let d_pnt = ut_duty_cost(&p.timing)?;
    Ok(UtDuty {
        d_pnt,
        d_dl_max: 1.0 - rx_reservation_bound(p)?,
        d_dl_mean_max: 1.0 - downlink_reservation(p)?,
        d_ul_max: 1.0 - d_pnt,
    })
}

/// Half-duplex UT time budget. The four duty cycles plus the ranging share
/// (when the UT uses the service) may not exceed one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtBudget {
    pub d_ul: f64,
    pub d_dl: f64,
    pub d_switch: f64,
    pub d_idle: f64,
}

impl UtBudget {
    pub fn check(&self, d_pnt: f64) -> Result<()> {
        let parts = [self.d_ul, self.d_dl, self.d_switch, self.d_idle, d_pnt];
        if parts.iter().any(|x| !(*x >= 0.0)) {
            return Err(Error::Range(format!("negative duty cycle in {self:?}")));
        }
        let sum: f64 = parts.iter().sum();
        if sum > 1.0 + 1e-12 {
            return Err(Error::Saturation(format!("UT duty cycles sum to {sum:.6} with d_PNT = {d_pnt:.6}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeasuredReservations {
    pub r_tx: f64,
    pub r_rx: f64,
    pub r_su: f64,
    pub r_e: f64,
}

/// Reservations realised by an actual schedule and its cubes.
pub fn measure_reservations(schedule: &GnssSchedule, tx: &TxCube, rx: &RxCube, grid: &CellGrid, p: &CostParams) -> MeasuredReservations {
    let secondaries = schedule.count_kind(Kind::Secondary) as f64;
    let bursts = schedule.len() as f64;
    let period = p.timing.t_period_us as f64;
    MeasuredReservations {
        r_tx: tx.occupancy(),
        r_rx: rx.occupancy(grid),
        r_su: secondaries * p.timing.t_setup_tx_us as f64 / (p.n_beams as f64 * p.n_sats as f64 * period),
        r_e: bursts * p.timing.t_burst_us as f64 * p.par / (period * p.n_sats as f64 * p.n_bc as f64),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub n: u32,
    pub n_cells: u64,
    pub n_sats: u32,
    pub t_sweep_us: f64,
    pub r_tx: f64,
    pub r_rx: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub measured: Option<MeasuredReservations>,
    pub dl_before: DownlinkCapacity,
    pub dl_after: DownlinkCapacity,
    pub r_dl: f64,
    pub per_cell_loss_bps: f64,
    pub r_su: f64,
    pub r_e: f64,
    pub complexity_bound_steps: f64,
    pub uplink: UplinkCost,
    pub ut: UtDuty,
    pub t_steer_max_s: f64,
    pub t_steer_budget_db: f64,
    /// Approximate; see [`displaced_steering_loss`].
    pub displaced_steering_loss: f64,
}

pub fn cost_report(p: &CostParams) -> Result<CostReport> {
    p.validate()?;
    let r_tx = tx_reservation_bound(p)?;
    let r_rx = rx_reservation_bound(p)?;
    let budget_db = throughput_loss_to_db(p.pointing_throughput_budget, p.spectral_efficiency);
    Ok(CostReport {
        n: p.timing.n,
        n_cells: p.n_cells,
        n_sats: p.n_sats,
        t_sweep_us: p.t_sweep_us,
        r_tx,
        r_rx,
        measured: None,
        dl_before: downlink_capacity(p, false)?,
        dl_after: downlink_capacity(p, true)?,
        r_dl: downlink_reservation(p)?,
        per_cell_loss_bps: per_cell_loss_bps(p)?,
        r_su: setup_reservation(p)?,
        r_e: energy_reservation(p)?,
        complexity_bound_steps: complexity_bound(p.timing.n, p.n_cells as usize, r_tx, r_rx)?,
        uplink: cnc_uplink_cost(p)?,
        ut: ut_duty(p)?,
        t_steer_max_s: steer_interval_for_budget(p)?,
        t_steer_budget_db: budget_db,
        displaced_steering_loss: displaced_steering_loss(p)?,
    })
}
