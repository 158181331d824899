//! Hexagonal service cells covering the band |lat| <= `lat_max`.
//!
//! Cells are laid out in latitude rows spaced by three quarters of the cell
//! diameter (pointy-top hexagons), each row holding as many cells as fit
//! around its parallel. Odd rows are shifted by half a cell. Adjacency between
//! neighbouring rows comes from a strip triangulation of the two rows, pruned
//! so that no cell keeps more than six neighbours.

use alloc::vec::Vec;

use libm::{ceil, cos, floor, round, sin, sqrt};
use serde::{Deserialize, Serialize};

use crate::geo::{wrap_lon, LatLon, DEG};
use crate::{Error, Result, EARTH_RADIUS_KM, SPEED_OF_LIGHT_M_S};

pub type CellId = u32;

/// Angular tolerance under which two distances count as a tie.
const TIE_EPS_RAD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridParams {
    /// Long (vertex-to-vertex) diagonal of a cell.
    pub cell_diameter_km: f64,
    pub lat_max_deg: f64,
    pub earth_radius_km: f64,
    /// Minimum elevation mask angle.
    pub min_elevation_deg: f64,
}

impl Default for GridParams {
    fn default() -> Self {
        Self {
            cell_diameter_km: 29.0,
            lat_max_deg: 60.0,
            earth_radius_km: EARTH_RADIUS_KM,
            min_elevation_deg: 40.0,
        }
    }
}

impl GridParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.cell_diameter_km > 0.0) {
            return Err(Error::param("cell_diameter_km", "must be > 0"));
        }
        if !(self.lat_max_deg > 0.0 && self.lat_max_deg <= 90.0) {
            return Err(Error::param("lat_max_deg", "must lie in (0, 90]"));
        }
        if !(self.earth_radius_km > 0.0) {
            return Err(Error::param("earth_radius_km", "must be > 0"));
        }
        if !(self.min_elevation_deg > 0.0 && self.min_elevation_deg < 90.0) {
            return Err(Error::param("min_elevation_deg", "must lie in (0, 90)"));
        }
        Ok(())
    }

    /// Area of one hexagon, (3 sqrt 3 / 8) D^2.
    pub fn hex_area_km2(&self) -> f64 {
        hex_area(self.cell_diameter_km)
    }

    /// Nominal cell count: service area divided by cell area.
    pub fn nominal_cell_count(&self) -> f64 {
        service_area(self.lat_max_deg, self.earth_radius_km) / self.hex_area_km2()
    }
}

pub fn hex_area(diameter_km: f64) -> f64 {
    3.0 * sqrt(3.0) / 8.0 * diameter_km * diameter_km
}

/// Area of the band |lat| <= `lat_max_deg` on a sphere: 4 pi R^2 sin(lat_max).
pub fn service_area(lat_max_deg: f64, radius: f64) -> f64 {
    4.0 * core::f64::consts::PI * radius * radius * sin(lat_max_deg * DEG)
}

/// Time for a wavefront to cross a cell: (D / c) cos(phi0), in seconds.
pub fn sweep_time(params: &GridParams) -> f64 {
    params.cell_diameter_km * 1000.0 / SPEED_OF_LIGHT_M_S * cos(params.min_elevation_deg * DEG)
}

/// [`sweep_time`] rounded up to whole microseconds.
pub fn sweep_time_us(params: &GridParams) -> u32 {
    ceil(sweep_time(params) * 1e6 - 1e-9) as u32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub id: CellId,
    pub center: LatLon,
    pub neighbor_ids: Vec<CellId>,
}

#[derive(Debug, Clone, PartialEq)]
struct Row {
    lat_deg: f64,
    first_id: CellId,
    count: u32,
    /// Longitude of the first cell's centre.
    lon0_deg: f64,
}

impl Row {
    fn spacing_deg(&self) -> f64 {
        360.0 / self.count as f64
    }

    fn lon(&self, j: u32) -> f64 {
        wrap_lon(self.lon0_deg + j as f64 * self.spacing_deg())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellGrid {
    params: GridParams,
    cells: Vec<Cell>,
    rows: Vec<Row>,
    row_spacing_deg: f64,
}

impl CellGrid {
    pub fn build(params: GridParams) -> Result<Self> {
        build_cell_grid(params)
    }

    /// Rebuilds a grid from explicit cells (e.g. an imported CSV). Nearest-cell
    /// queries fall back to an exhaustive scan for such grids.
    pub fn from_cells(params: GridParams, cells: Vec<Cell>) -> Result<Self> {
        params.validate()?;
        for (i, c) in cells.iter().enumerate() {
            if c.id as usize != i {
                return Err(Error::param("cells", "cell ids must be dense 0..N-1 in order"));
            }
            if c.neighbor_ids.iter().any(|&n| n as usize >= cells.len() || n == c.id) {
                return Err(Error::param("cells", "neighbor id out of range or self-loop"));
            }
        }
        Ok(Self {
            params,
            cells,
            rows: Vec::new(),
            row_spacing_deg: 0.0,
        })
    }

    pub fn params(&self) -> &GridParams {
        &self.params
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell(&self, id: CellId) -> &Cell {
        &self.cells[id as usize]
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn neighbors(&self, id: CellId) -> &[CellId] {
        &self.cells[id as usize].neighbor_ids
    }

    /// Largest neighbour count over all cells.
    pub fn max_neighbors(&self) -> usize {
        self.cells.iter().map(|c| c.neighbor_ids.len()).max().unwrap_or(0)
    }

    pub fn sweep_time(&self) -> f64 {
        sweep_time(&self.params)
    }

    pub fn sweep_time_us(&self) -> u32 {
        sweep_time_us(&self.params)
    }

    /// Id of the cell whose centre is closest to `point`; ties go to the lower id.
    pub fn nearest_cell(&self, point: &LatLon) -> Result<CellId> {
        if point.lat_deg.abs() > self.params.lat_max_deg + 1e-9 {
            return Err(Error::OutOfBand {
                lat_deg: point.lat_deg,
                lat_max_deg: self.params.lat_max_deg,
            });
        }
        if self.rows.is_empty() {
            return nearest_exhaustive(&self.cells, point).ok_or(Error::param("grid", "empty grid"));
        }

        let mut best: Option<(f64, CellId)> = None;
        let r0 = round((point.lat_deg - self.rows[0].lat_deg) / self.row_spacing_deg) as i64;
        for r in (r0 - 2)..=(r0 + 2) {
            if r < 0 || r as usize >= self.rows.len() {
                continue;
            }
            let row = &self.rows[r as usize];
            for j in row_candidates(row, point.lon_deg) {
                let id = row.first_id + j;
                let d = point.central_angle(&self.cells[id as usize].center);
                best = Some(pick(best, d, id));
            }
        }
        best.map(|(_, id)| id).ok_or(Error::param("grid", "empty grid"))
    }

    /// Ids of all cells whose centres lie within `radius_km` of `point`, ascending.
    pub fn cells_within(&self, point: &LatLon, radius_km: f64) -> Vec<CellId> {
        let angle = radius_km / self.params.earth_radius_km;
        if self.rows.is_empty() {
            return self
                .cells
                .iter()
                .filter(|c| point.central_angle(&c.center) <= angle)
                .map(|c| c.id)
                .collect();
        }
        let mut out = Vec::new();
        let ang_deg = angle / DEG;
        for row in &self.rows {
            if (row.lat_deg - point.lat_deg).abs() > ang_deg + 1e-9 {
                continue;
            }
            let half = lon_half_width_deg(point.lat_deg, row.lat_deg, angle);
            let candidates: Vec<u32> = match half {
                Some(h) if h < 180.0 => {
                    let k = (h / row.spacing_deg()) as i64 + 2;
                    let offset = wrap_lon(point.lon_deg - row.lon0_deg + 180.0) + 180.0;
                    let c = floor(offset / row.spacing_deg()) as i64;
                    let n = row.count as i64;
                    let mut v: Vec<u32> = ((c - k)..=(c + k)).map(|j| j.rem_euclid(n) as u32).collect();
                    v.sort_unstable();
                    v.dedup();
                    v
                }
                _ => (0..row.count).collect(),
            };
            for j in candidates {
                let id = row.first_id + j;
                if point.central_angle(&self.cells[id as usize].center) <= angle {
                    out.push(id);
                }
            }
        }
        out.sort_unstable();
        out
    }
}

fn pick(best: Option<(f64, CellId)>, d: f64, id: CellId) -> (f64, CellId) {
    match best {
        None => (d, id),
        Some((bd, bid)) => {
            if d < bd - TIE_EPS_RAD || ((d - bd).abs() <= TIE_EPS_RAD && id < bid) {
                (d, id)
            } else {
                (bd, bid)
            }
        }
    }
}

fn nearest_exhaustive(cells: &[Cell], point: &LatLon) -> Option<CellId> {
    let mut best = None;
    for c in cells {
        best = Some(pick(best, point.central_angle(&c.center), c.id));
    }
    best.map(|(_, id)| id)
}

/// Longitude half-width (deg) of the part of the parallel at `row_lat` lying
/// within central angle `angle` of a point at `lat`. `None` if the whole
/// parallel qualifies.
fn lon_half_width_deg(lat: f64, row_lat: f64, angle: f64) -> Option<f64> {
    let (p1, p2) = (lat * DEG, row_lat * DEG);
    let denom = cos(p1) * cos(p2);
    if denom < 1e-12 {
        return None;
    }
    let c = (cos(angle) - sin(p1) * sin(p2)) / denom;
    if c <= -1.0 {
        None
    } else if c >= 1.0 {
        Some(0.0)
    } else {
        Some(libm::acos(c) / DEG)
    }
}

/// Column indices of `row` that can hold the nearest centre to longitude `lon`.
fn row_candidates(row: &Row, lon: f64) -> Vec<u32> {
    let n = row.count as i64;
    if n <= 5 {
        return (0..row.count).collect();
    }
    let offset = wrap_lon(lon - row.lon0_deg + 180.0) + 180.0; // in [0, 360)
    let c = floor(offset / row.spacing_deg()) as i64;
    let mut v: Vec<u32> = ((c - 2)..=(c + 2)).map(|j| j.rem_euclid(n) as u32).collect();
    v.sort_unstable();
    v.dedup();
    v
}

/// Lays out the banded hexagonal grid described in the module docs.
pub fn build_cell_grid(params: GridParams) -> Result<CellGrid> {
    params.validate()?;
    let r = params.earth_radius_km;
    let d = params.cell_diameter_km;
    let row_spacing_rad = 0.75 * d / r;
    let cell_width_km = sqrt(3.0) / 2.0 * d;
    let lat_max = params.lat_max_deg * DEG;

    let n_rows = floor(2.0 * lat_max / row_spacing_rad + 1e-9) as usize + 1;
    let mid = (n_rows as f64 - 1.0) / 2.0;

    let mut rows = Vec::with_capacity(n_rows);
    let mut next_id: u32 = 0;
    for k in 0..n_rows {
        let lat = (k as f64 - mid) * row_spacing_rad;
        let lat = lat.clamp(-core::f64::consts::FRAC_PI_2, core::f64::consts::FRAC_PI_2);
        let circumference = 2.0 * core::f64::consts::PI * r * cos(lat);
        let count = (round(circumference / cell_width_km) as u32).max(1);
        let spacing = 360.0 / count as f64;
        let shift = if k % 2 == 1 { 0.5 } else { 0.0 };
        rows.push(Row {
            lat_deg: lat / DEG,
            first_id: next_id,
            count,
            lon0_deg: -180.0 + shift * spacing,
        });
        next_id = next_id
            .checked_add(count)
            .ok_or(Error::param("cell_diameter_km", "too many cells for 32-bit ids"))?;
    }

    let mut cells: Vec<Cell> = Vec::with_capacity(next_id as usize);
    for row in &rows {
        for j in 0..row.count {
            cells.push(Cell {
                id: row.first_id + j,
                center: LatLon::new(row.lat_deg, row.lon(j)),
                neighbor_ids: Vec::new(),
            });
        }
    }

    let mut adj: Vec<Vec<CellId>> = (0..cells.len()).map(|_| Vec::with_capacity(8)).collect();
    let mut link = |a: CellId, b: CellId| {
        if a != b {
            adj[a as usize].push(b);
            adj[b as usize].push(a);
        }
    };

    for row in &rows {
        if row.count >= 2 {
            for j in 0..row.count {
                link(row.first_id + j, row.first_id + (j + 1) % row.count);
            }
        }
    }
    for pair in rows.windows(2) {
        strip_links(&pair[0], &pair[1], &mut link);
    }

    for list in adj.iter_mut() {
        list.sort_unstable();
        list.dedup();
    }
    prune_to_six(&mut adj, &cells);

    for (cell, list) in cells.iter_mut().zip(adj) {
        cell.neighbor_ids = list;
    }

    Ok(CellGrid {
        params,
        cells,
        rows,
        row_spacing_deg: row_spacing_rad / DEG,
    })
}

/// Links every cell of one row to the nearest cells of the other row on
/// either side of it in longitude (a triangle strip between two rings).
fn strip_links(a: &Row, b: &Row, link: &mut impl FnMut(CellId, CellId)) {
    // (offset from -180 in [0, 360), row tag, column)
    let mut merged: Vec<(f64, u8, u32)> = Vec::with_capacity((a.count + b.count) as usize);
    for j in 0..a.count {
        merged.push((a.lon(j) + 180.0, 0, j));
    }
    for j in 0..b.count {
        merged.push((b.lon(j) + 180.0, 1, j));
    }
    merged.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let m = merged.len();
    let id_of = |e: &(f64, u8, u32)| if e.1 == 0 { a.first_id + e.2 } else { b.first_id + e.2 };

    for i in 0..m {
        let here = merged[i];
        // next element of the other row, walking forward around the circle
        for step in 1..m {
            let other = merged[(i + step) % m];
            if other.1 != here.1 {
                link(id_of(&here), id_of(&other));
                break;
            }
        }
        for step in 1..m {
            let other = merged[(i + m - step) % m];
            if other.1 != here.1 {
                link(id_of(&here), id_of(&other));
                break;
            }
        }
    }
}

/// Drops the longest links of any cell with more than six neighbours, never
/// taking the far end below three.
fn prune_to_six(adj: &mut [Vec<CellId>], cells: &[Cell]) {
    for id in 0..adj.len() {
        while adj[id].len() > 6 {
            let here = &cells[id].center;
            let victim = adj[id]
                .iter()
                .copied()
                .filter(|&n| adj[n as usize].len() > 3)
                .max_by(|&x, &y| {
                    let dx = here.central_angle(&cells[x as usize].center);
                    let dy = here.central_angle(&cells[y as usize].center);
                    dx.total_cmp(&dy).then(x.cmp(&y))
                });
            let Some(v) = victim else { break };
            adj[id].retain(|&n| n != v);
            adj[v as usize].retain(|&n| n as usize != id);
        }
    }
}
