use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Burst, switching and period durations. All times are integer microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingParams {
    pub t_burst_us: u32,
    pub t_switch_tx_us: u32,
    pub t_switch_rx_us: u32,
    pub t_setup_tx_us: u32,
    pub t_setup_rx_us: u32,
    pub t_period_us: u32,
    /// Ranging signals per cell per period.
    pub n: u32,
}

impl Default for TimingParams {
    fn default() -> Self {
        Self {
            t_burst_us: 500,
            t_switch_tx_us: 100,
            t_switch_rx_us: 100,
            t_setup_tx_us: 5_000,
            t_setup_rx_us: 5_000,
            t_period_us: 1_000_000,
            n: 5,
        }
    }
}

impl TimingParams {
    /// Checks the duration invariants. `n` is not constrained here since the
    /// closed-form cost model accepts any signal count.
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("t_burst_us", self.t_burst_us),
            ("t_switch_tx_us", self.t_switch_tx_us),
            ("t_switch_rx_us", self.t_switch_rx_us),
            ("t_setup_tx_us", self.t_setup_tx_us),
            ("t_setup_rx_us", self.t_setup_rx_us),
            ("t_period_us", self.t_period_us),
        ];
        for (name, v) in named {
            if v == 0 {
                return Err(Error::param(name, "must be > 0"));
            }
        }
        if self.t_burst_us as u64 + 2 * self.t_switch_tx_us as u64 >= self.t_period_us as u64 {
            return Err(Error::param("t_burst_us", "t_burst + 2 t_switch_tx must be shorter than t_period"));
        }
        Ok(())
    }

    /// Additional requirement for building schedules.
    pub fn validate_for_scheduling(&self) -> Result<()> {
        self.validate()?;
        if self.n < 4 {
            return Err(Error::param("n", "at least 4 signals per cell are needed for a position fix"));
        }
        Ok(())
    }

    pub fn period_s(&self) -> f64 {
        self.t_period_us as f64 * 1e-6
    }
}
