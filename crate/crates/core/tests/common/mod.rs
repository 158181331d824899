#![allow(dead_code)]

use fusedpnt_core::cost::CostParams;
use fusedpnt_core::grid::{Cell, CellGrid, GridParams};
use fusedpnt_core::orbit::{ConstellationConfig, ShellConfig};
use fusedpnt_core::schedule::TimingParams;

/// Band grid of roughly 2000 cells at a 10 degree elevation mask.
pub fn desk_grid() -> CellGrid {
    CellGrid::build(GridParams {
        cell_diameter_km: 567.0,
        lat_max_deg: 55.0,
        min_elevation_deg: 10.0,
        ..GridParams::default()
    })
    .unwrap()
}

/// Two 200-SV Walker shells.
pub fn desk_constellation() -> ConstellationConfig {
    ConstellationConfig {
        shells: vec![
            ShellConfig {
                altitude_km: 1200.0,
                inclination_deg: 50.0,
                n_planes: 20,
                sats_per_plane: 10,
                raan_spread_deg: 360.0,
                phase_offset_deg: 7.0,
            },
            ShellConfig {
                altitude_km: 1300.0,
                inclination_deg: 65.0,
                n_planes: 20,
                sats_per_plane: 10,
                raan_spread_deg: 360.0,
                phase_offset_deg: 11.0,
            },
        ],
        ..ConstellationConfig::default()
    }
}

pub fn desk_cost(grid: &CellGrid, config: &ConstellationConfig, timing: &TimingParams) -> CostParams {
    CostParams {
        timing: *timing,
        n_sats: config.n_sats(),
        n_beams: config.n_beams as u32,
        n_channels: config.n_channels as u32,
        n_bc: config.n_bc as u32,
        ..CostParams::default()
    }
    .for_schedule(grid)
}

/// Grid holding only the listed cells of `grid`, renumbered densely, with
/// adjacency restricted to the subset.
pub fn subgrid(grid: &CellGrid, ids: &[u32]) -> CellGrid {
    let cells = ids
        .iter()
        .enumerate()
        .map(|(i, &id)| {
            let c = grid.cell(id);
            Cell {
                id: i as u32,
                center: c.center,
                neighbor_ids: c
                    .neighbor_ids
                    .iter()
                    .filter_map(|n| ids.iter().position(|x| x == n).map(|p| p as u32))
                    .collect(),
            }
        })
        .collect();
    CellGrid::from_cells(*grid.params(), cells).unwrap()
}
