//! Scenario files: TOML with one table per subsystem. Every table and key is
//! optional; omitted values take the defaults of the corresponding type.

use std::path::{Path, PathBuf};

use fusedpnt_core::cost::{CostParams, UplinkParams};
use fusedpnt_core::grid::{sweep_time, CellGrid, GridParams};
use fusedpnt_core::orbit::ConstellationConfig;
use fusedpnt_core::population::{ParParams, SynthSpec};
use fusedpnt_core::schedule::{BitLayout, GnssSchedule, TimingParams};
use fusedpnt_core::scheduler::SchedulerConfig;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{CliError, CliResult};

/// Overrides for cost-model inputs that are not implied by the other tables.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostOverrides {
    /// Defaults to the nominal cell count of the grid parameters.
    pub n_cells: Option<u64>,
    pub n_adj: Option<u32>,
    /// Defaults to the sweep time of the grid parameters.
    pub t_sweep_us: Option<f64>,
    /// Defaults to the constellation size when shells are given.
    pub n_sats: Option<u32>,
    pub par: Option<f64>,
    pub channel_bandwidth_hz: Option<f64>,
    pub spectral_efficiency: Option<f64>,
    pub assignment_bits: Option<u32>,
    pub fwhm_deg: Option<f64>,
    pub omega_deg_s: Option<f64>,
    pub pointing_throughput_budget: Option<f64>,
    pub uplink: Option<UplinkParams>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopulationConfig {
    /// ASCII-grid density raster of the modelled region.
    pub world_raster: Option<PathBuf>,
    /// ASCII-grid density raster of the reference region used for the
    /// unserved-population threshold.
    pub reference_raster: Option<PathBuf>,
    /// Synthetic world raster, used when `world_raster` is absent.
    pub synth: Option<SynthSpec>,
    pub synth_cellsize_deg: Option<f64>,
    pub par: ParParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutChoice {
    /// Default layout unless some time of flight needs the long field.
    #[default]
    Auto,
    Default,
    LongFlight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodecConfig {
    pub layout: LayoutChoice,
}

impl CodecConfig {
    pub fn layout_for(&self, schedule: &GnssSchedule, sweep_us: u32) -> BitLayout {
        let base = match self.layout {
            LayoutChoice::Default => BitLayout::default(),
            LayoutChoice::LongFlight => BitLayout::long_flight(),
            LayoutChoice::Auto => {
                let limit = BitLayout::max_value(BitLayout::default().t_flight_bits);
                if schedule.assignments.iter().any(|a| a.t_flight_us as u64 > limit) {
                    BitLayout::long_flight()
                } else {
                    BitLayout::default()
                }
            }
        };
        base.with_sweep(sweep_us)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub grid: GridParams,
    pub constellation: ConstellationConfig,
    pub timing: TimingParams,
    pub cost: CostOverrides,
    pub population: PopulationConfig,
    pub scheduler: SchedulerConfig,
    pub codec: CodecConfig,
    pub output_dir: PathBuf,
    /// Directory against which relative input paths resolve.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: String::from("default"),
            grid: GridParams::default(),
            constellation: ConstellationConfig::default(),
            timing: TimingParams::default(),
            cost: CostOverrides::default(),
            population: PopulationConfig::default(),
            scheduler: SchedulerConfig::default(),
            codec: CodecConfig::default(),
            output_dir: PathBuf::from("out"),
            base_dir: PathBuf::from("."),
        }
    }
}

/// One `key=v1,v2,...` sweep axis over a dotted scenario key.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub key: String,
    pub values: Vec<Value>,
}

impl std::str::FromStr for Sweep {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        let (key, vals) = s
            .split_once('=')
            .ok_or_else(|| CliError::Parse(format!("sweep `{s}` must look like key=a,b,c")))?;
        let values: Vec<Value> = vals.split(',').map(|v| parse_scalar(v.trim())).collect();
        if key.trim().is_empty() || values.is_empty() {
            return Err(CliError::Parse(format!("sweep `{s}` has no key or values")));
        }
        Ok(Sweep {
            key: key.trim().to_string(),
            values,
        })
    }
}

fn parse_scalar(s: &str) -> Value {
    if let Ok(i) = s.parse::<i64>() {
        Value::Integer(i)
    } else if let Ok(f) = s.parse::<f64>() {
        Value::Float(f)
    } else if let Ok(b) = s.parse::<bool>() {
        Value::Boolean(b)
    } else {
        Value::String(s.to_string())
    }
}

/// Sets a dotted key, creating intermediate tables.
pub fn set_dotted(table: &mut Table, key: &str, value: Value) -> CliResult<()> {
    let parts: Vec<&str> = key.split('.').collect();
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Parse(format!("`{p}` in `{key}` is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

impl Scenario {
    pub fn read_table(path: &Path) -> CliResult<Table> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        text.parse::<Table>()
            .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
    }

    pub fn from_table(table: Table, base_dir: &Path) -> CliResult<Self> {
        let mut s: Scenario = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Parse(e.to_string()))?;
        s.base_dir = base_dir.to_path_buf();
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        Self::load_with(path, &[])
    }

    /// Loads a scenario with `(dotted key, value)` overrides applied first.
    pub fn load_with(path: &Path, overrides: &[(String, Value)]) -> CliResult<Self> {
        let mut table = Self::read_table(path)?;
        for (k, v) in overrides {
            set_dotted(&mut table, k, v.clone())?;
        }
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_table(table, &base).map_err(|e| match e {
            CliError::Parse(m) => CliError::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> CliResult<()> {
        self.grid.validate()?;
        self.constellation.validate()?;
        self.timing.validate()?;
        self.scheduler.validate()?;
        self.population.par.validate()?;
        for p in [&self.population.world_raster, &self.population.reference_raster].into_iter().flatten() {
            let full = self.resolve(p);
            if !full.exists() {
                return Err(CliError::Io(format!("raster {} does not exist", full.display())));
            }
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn build_grid(&self) -> CliResult<CellGrid> {
        Ok(CellGrid::build(self.grid)?)
    }

    /// Cost-model inputs: scenario tables first, then explicit overrides.
    pub fn cost_params(&self) -> CostParams {
        let d = CostParams::default();
        let c = &self.cost;
        let n_sats = self.constellation.n_sats();
        CostParams {
            timing: self.timing,
            n_cells: c.n_cells.unwrap_or_else(|| self.grid.nominal_cell_count().round() as u64),
            n_adj: c.n_adj.unwrap_or(d.n_adj),
            t_sweep_us: c.t_sweep_us.unwrap_or_else(|| sweep_time(&self.grid) * 1e6),
            n_sats: c.n_sats.unwrap_or(if n_sats > 0 { n_sats } else { d.n_sats }),
            n_beams: self.constellation.n_beams as u32,
            n_channels: self.constellation.n_channels as u32,
            n_bc: self.constellation.n_bc as u32,
            par: c.par.unwrap_or(d.par),
            channel_bandwidth_hz: c.channel_bandwidth_hz.unwrap_or(d.channel_bandwidth_hz),
            spectral_efficiency: c.spectral_efficiency.unwrap_or(d.spectral_efficiency),
            assignment_bits: c.assignment_bits.unwrap_or(d.assignment_bits),
            fwhm_deg: c.fwhm_deg.unwrap_or(d.fwhm_deg),
            omega_deg_s: c.omega_deg_s.unwrap_or(d.omega_deg_s),
            pointing_throughput_budget: c.pointing_throughput_budget.unwrap_or(d.pointing_throughput_budget),
            uplink: c.uplink.unwrap_or(d.uplink),
        }
    }
}
