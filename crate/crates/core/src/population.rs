//! Population-density rasters and the transmitter peak-to-average ratio.
//!
//! A [`DensityGrid`] is a regular latitude/longitude raster. Row 0 is the
//! northernmost row, as in ASCII-grid files. Invalid cells (no data, ocean)
//! count as empty.

use alloc::vec;
use alloc::vec::Vec;

use libm::{acos, asin, atan2, ceil, cos, exp, floor, sin};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geo::{coverage_half_angle, wrap_lon, LatLon, DEG};
use crate::{Error, Result, EARTH_RADIUS_KM};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub n_cols: usize,
    pub n_rows: usize,
    pub cellsize_deg: f64,
    /// Longitude of the western edge.
    pub lon_min_deg: f64,
    /// Latitude of the southern edge.
    pub lat_min_deg: f64,
    /// Row-major, northern row first.
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
}

impl DensityGrid {
    pub fn new(n_cols: usize, n_rows: usize, cellsize_deg: f64, lon_min_deg: f64, lat_min_deg: f64, values: Vec<f64>, valid: Vec<bool>) -> Result<Self> {
        let g = Self {
            n_cols,
            n_rows,
            cellsize_deg,
            lon_min_deg,
            lat_min_deg,
            values,
            valid,
        };
        g.validate()?;
        Ok(g)
    }

    /// Global raster filled with one value.
    pub fn global(cellsize_deg: f64, value: f64) -> Result<Self> {
        let n_rows = round_count(180.0 / cellsize_deg);
        let n_cols = 2 * n_rows;
        Self::new(n_cols, n_rows, cellsize_deg, -180.0, -90.0, vec![value; n_cols * n_rows], vec![true; n_cols * n_rows])
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cellsize_deg > 0.0) {
            return Err(Error::param("cellsize_deg", "must be > 0"));
        }
        let steps = 180.0 / self.cellsize_deg;
        if (steps - libm::round(steps)).abs() > 1e-6 {
            return Err(Error::param("cellsize_deg", "must divide 180 degrees evenly"));
        }
        if self.n_cols == 0 || self.n_rows == 0 {
            return Err(Error::param("n_cols", "raster must not be empty"));
        }
        if self.values.len() != self.n_cols * self.n_rows || self.valid.len() != self.values.len() {
            return Err(Error::param("values", "length must equal n_cols * n_rows"));
        }
        let top = self.lat_min_deg + self.n_rows as f64 * self.cellsize_deg;
        if self.lat_min_deg < -90.0 - 1e-9 || top > 90.0 + 1e-9 {
            return Err(Error::param("lat_min_deg", "raster extends beyond the poles"));
        }
        if self.n_cols as f64 * self.cellsize_deg > 360.0 + 1e-9 {
            return Err(Error::param("n_cols", "raster wider than 360 degrees"));
        }
        if self.values.iter().zip(&self.valid).any(|(v, ok)| *ok && !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::param("values", "densities must be finite and >= 0"));
        }
        Ok(())
    }

    /// True when the columns close around the globe.
    pub fn wraps(&self) -> bool {
        (self.n_cols as f64 * self.cellsize_deg - 360.0).abs() < 1e-6
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.n_cols + col
    }

    /// Southern and northern edge latitudes of `row`.
    pub fn row_bounds_deg(&self, row: usize) -> (f64, f64) {
        let north = self.lat_min_deg + (self.n_rows - row) as f64 * self.cellsize_deg;
        (north - self.cellsize_deg, north)
    }

    pub fn center(&self, row: usize, col: usize) -> LatLon {
        let (s, n) = self.row_bounds_deg(row);
        LatLon::new(
            (s + n) / 2.0,
            wrap_lon(self.lon_min_deg + (col as f64 + 0.5) * self.cellsize_deg),
        )
    }

    /// Spherical-zone area of one cell in `row`: R^2 dlon (sin phi2 - sin phi1).
    pub fn cell_area_km2(&self, row: usize, radius_km: f64) -> f64 {
        let (s, n) = self.row_bounds_deg(row);
        radius_km * radius_km * self.cellsize_deg * DEG * (sin(n * DEG) - sin(s * DEG))
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let i = self.index(row, col);
        self.valid[i].then(|| self.values[i])
    }

    /// Row and column containing a point, if it lies on the raster.
    pub fn locate(&self, p: &LatLon) -> Option<(usize, usize)> {
        let top = self.lat_min_deg + self.n_rows as f64 * self.cellsize_deg;
        let r = floor((top - p.lat_deg) / self.cellsize_deg);
        let mut dlon = p.lon_deg - self.lon_min_deg;
        dlon -= 360.0 * floor(dlon / 360.0);
        let c = floor(dlon / self.cellsize_deg);
        if r < 0.0 || p.lat_deg < self.lat_min_deg {
            return None;
        }
        // the southern edge belongs to the last row
        let row = (r as usize).min(self.n_rows - 1);
        let col = c as usize;
        (row < self.n_rows && col < self.n_cols).then_some((row, col))
    }

    /// People per cell: density times cell area, zero for invalid cells.
    pub fn populations(&self, radius_km: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.values.len()];
        for row in 0..self.n_rows {
            let area = self.cell_area_km2(row, radius_km);
            for col in 0..self.n_cols {
                let i = self.index(row, col);
                if self.valid[i] {
                    out[i] = self.values[i] * area;
                }
            }
        }
        out
    }

    pub fn total_population(&self, radius_km: f64) -> f64 {
        self.populations(radius_km).iter().sum()
    }
}

fn round_count(x: f64) -> usize {
    libm::round(x).max(0.0) as usize
}

/// Synthetic density fields for tests and demos.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SynthSpec {
    Uniform {
        density: f64,
    },
    /// Constant density inside a spherical cap, background elsewhere.
    Hotspot {
        center: LatLon,
        radius_km: f64,
        density: f64,
        #[serde(default)]
        background: f64,
    },
    GaussianMixture {
        components: Vec<GaussianComponent>,
        #[serde(default)]
        background: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub center: LatLon,
    pub sigma_km: f64,
    pub peak: f64,
}

pub fn synth_density(spec: &SynthSpec, cellsize_deg: f64, radius_km: f64) -> Result<DensityGrid> {
    let mut g = DensityGrid::global(cellsize_deg, 0.0)?;
    for row in 0..g.n_rows {
        for col in 0..g.n_cols {
            let p = g.center(row, col);
            let v = match spec {
                SynthSpec::Uniform { density } => *density,
                SynthSpec::Hotspot { center, radius_km: r, density, background } => {
                    if center.central_angle(&p) * radius_km <= *r {
                        *density
                    } else {
                        *background
                    }
                }
                SynthSpec::GaussianMixture { components, background } => {
                    background
                        + components
                            .iter()
                            .map(|c| {
                                let d = c.center.central_angle(&p) * radius_km / c.sigma_km;
                                c.peak * exp(-0.5 * d * d)
                            })
                            .sum::<f64>()
                }
            };
            let i = g.index(row, col);
            g.values[i] = v;
        }
    }
    g.validate()?;
    Ok(g)
}

/// Density at which the population, accumulated from the least dense cells
/// upward, first exceeds `target`.
pub fn density_threshold(grid: &DensityGrid, target: f64, radius_km: f64) -> Result<f64> {
    let pops = grid.populations(radius_km);
    let mut order: Vec<usize> = (0..pops.len()).filter(|&i| grid.valid[i]).collect();
    let total: f64 = order.iter().map(|&i| pops[i]).sum();
    if !(target >= 0.0) || target > total {
        return Err(Error::Range(alloc::format!("target population {target} outside [0, {total}]")));
    }
    order.sort_by(|&a, &b| grid.values[a].total_cmp(&grid.values[b]).then(a.cmp(&b)));
    let mut cum = 0.0;
    for &i in &order {
        cum += pops[i];
        if cum > target {
            return Ok(grid.values[i]);
        }
    }
    order
        .last()
        .map(|&i| grid.values[i])
        .ok_or_else(|| Error::Range(alloc::string::String::from("raster has no valid cells")))
}

/// Pointwise `min(density, rho_max)`.
pub fn cap_density(grid: &DensityGrid, rho_max: f64) -> DensityGrid {
    let mut out = grid.clone();
    for v in &mut out.values {
        *v = v.min(rho_max);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParParams {
    /// Population without terrestrial broadband in the reference region.
    pub target_unserved_population: f64,
    /// Demand ratio between the modelled region and the reference region.
    pub gamma: f64,
    /// Overrides `gamma * threshold` when set.
    pub rho_max: Option<f64>,
    pub altitude_km: f64,
    pub inclination_deg: f64,
    /// Minimum elevation defining the visible cap.
    pub min_elevation_deg: f64,
    pub n_orbit_samples: usize,
    pub rng_seed: u64,
    /// Percentile of track samples taken as the peak.
    pub peak_percentile: f64,
    pub earth_radius_km: f64,
}

impl Default for ParParams {
    fn default() -> Self {
        Self {
            target_unserved_population: 42e6,
            gamma: 122.0 / 83.0,
            rho_max: None,
            altitude_km: 550.0,
            inclination_deg: 53.0,
            min_elevation_deg: 40.0,
            n_orbit_samples: 100_000,
            rng_seed: 0,
            peak_percentile: 99.9,
            earth_radius_km: EARTH_RADIUS_KM,
        }
    }
}

impl ParParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(Error::param("gamma", "must be > 0"));
        }
        if !(self.altitude_km > 0.0) {
            return Err(Error::param("altitude_km", "must be > 0"));
        }
        if !(self.inclination_deg > 0.0 && self.inclination_deg <= 180.0) {
            return Err(Error::param("inclination_deg", "must lie in (0, 180]"));
        }
        if !(self.min_elevation_deg >= 0.0 && self.min_elevation_deg < 90.0) {
            return Err(Error::param("min_elevation_deg", "must lie in [0, 90)"));
        }
        if self.n_orbit_samples == 0 {
            return Err(Error::param("n_orbit_samples", "must be >= 1"));
        }
        if !(self.peak_percentile > 0.0 && self.peak_percentile <= 100.0) {
            return Err(Error::param("peak_percentile", "must lie in (0, 100]"));
        }
        if let Some(r) = self.rho_max {
            if !(r >= 0.0) {
                return Err(Error::param("rho_max", "must be >= 0"));
            }
        }
        Ok(())
    }
}

/// Visible-subscriber counts: for each raster cell centre taken as a
/// sub-satellite point, the population of all cells whose centres lie within
/// the coverage cap of half-angle psi(h, phi0). The result shares the input's
/// geometry; its values are head counts and every cell is valid.
pub fn visible_subscribers(grid: &DensityGrid, altitude_km: f64, min_elevation_deg: f64, radius_km: f64) -> Result<DensityGrid> {
    if !(altitude_km > 0.0) {
        return Err(Error::param("altitude_km", "must be > 0"));
    }
    let psi = coverage_half_angle(radius_km, altitude_km, min_elevation_deg);
    let pops = grid.populations(radius_km);
    let (nr, nc) = (grid.n_rows, grid.n_cols);
    let wraps = grid.wraps();
    let cs = grid.cellsize_deg * DEG;

    // per-row prefix sums (doubled for wrap-around)
    let width = if wraps { 2 * nc } else { nc };
    let mut prefix = vec![0.0; nr * (width + 1)];
    for r in 0..nr {
        let base = r * (width + 1);
        for k in 0..width {
            prefix[base + k + 1] = prefix[base + k] + pops[r * nc + k % nc];
        }
    }
    let row_sum = |r: usize, lo: i64, hi: i64| -> f64 {
        // columns lo..=hi relative to the raster
        let base = r * (width + 1);
        if wraps {
            if hi - lo + 1 >= nc as i64 {
                return prefix[base + nc];
            }
            let lo_m = lo.rem_euclid(nc as i64) as usize;
            let len = (hi - lo + 1) as usize;
            prefix[base + lo_m + len] - prefix[base + lo_m]
        } else {
            let lo = lo.max(0) as usize;
            let hi = hi.min(nc as i64 - 1);
            if hi < lo as i64 {
                return 0.0;
            }
            prefix[base + hi as usize + 1] - prefix[base + lo]
        }
    };
    let lat = |r: usize| {
        let (s, n) = grid.row_bounds_deg(r);
        (s + n) / 2.0 * DEG
    };
    let cos_psi = cos(psi);
    let mut out = grid.clone();
    out.valid = vec![true; nr * nc];
    let reach = ceil(psi / cs) as i64 + 1;
    for r in 0..nr {
        let phi1 = lat(r);
        // (source row, half-width in columns) contributing to points of row r
        let mut spans = Vec::new();
        let r_lo = (r as i64 - reach).max(0) as usize;
        let r_hi = ((r as i64 + reach) as usize).min(nr - 1);
        for r2 in r_lo..=r_hi {
            let phi2 = lat(r2);
            let den = cos(phi1) * cos(phi2);
            let num = cos_psi - sin(phi1) * sin(phi2);
            let half = if den <= 1e-15 {
                if num <= 0.0 {
                    Some(nc as i64)
                } else {
                    None
                }
            } else {
                let c = num / den;
                if c > 1.0 {
                    None
                } else if c <= -1.0 {
                    Some(nc as i64)
                } else {
                    Some(floor(acos(c) / cs + 1e-9) as i64)
                }
            };
            if let Some(k) = half {
                spans.push((r2, k));
            }
        }
        for c in 0..nc {
            let mut sum = 0.0;
            for &(r2, k) in &spans {
                sum += row_sum(r2, c as i64 - k, c as i64 + k);
            }
            out.values[r * nc + c] = sum;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackSample {
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub count: f64,
}

/// Sub-satellite points drawn uniformly in right ascension of the node and
/// argument of latitude for a circular orbit of the given inclination, each
/// read from the nearest raster cell (zero off the raster).
pub fn track_samples(counts: &DensityGrid, inclination_deg: f64, n_samples: usize, seed: u64) -> Result<Vec<TrackSample>> {
    if !(inclination_deg > 0.0) {
        return Err(Error::param("inclination_deg", "must be > 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let i = inclination_deg * DEG;
    let two_pi = 2.0 * core::f64::consts::PI;
    let mut out = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let raan: f64 = rng.gen_range(0.0..two_pi);
        let u: f64 = rng.gen_range(0.0..two_pi);
        let lat = asin(sin(i) * sin(u));
        let lon = raan + atan2(cos(i) * sin(u), cos(u));
        let p = LatLon::new(lat / DEG, wrap_lon(lon / DEG));
        let count = counts.locate(&p).and_then(|(r, c)| counts.get(r, c)).unwrap_or(0.0);
        out.push(TrackSample {
            lat_deg: p.lat_deg,
            lon_deg: p.lon_deg,
            count,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParReport {
    pub par: f64,
    pub peak: f64,
    pub mean: f64,
    pub n_samples: usize,
    pub peak_percentile: f64,
}

/// Peak-to-average ratio of track samples. The peak is the given percentile
/// (nearest rank), floored at the mean so the ratio never drops below one.
pub fn par_from_samples(samples: &[f64], peak_percentile: f64) -> Result<ParReport> {
    if samples.is_empty() {
        return Err(Error::UndefinedRatio(alloc::string::String::from("no samples")));
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    if !(mean > 0.0) {
        return Err(Error::UndefinedRatio(alloc::string::String::from("all sampled counts are zero")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ceil(peak_percentile / 100.0 * sorted.len() as f64).max(1.0) as usize;
    let peak = sorted[rank.min(sorted.len()) - 1].max(mean);
    Ok(ParReport {
        par: peak / mean,
        peak,
        mean,
        n_samples: samples.len(),
        peak_percentile,
    })
}

pub fn par_estimate(counts: &DensityGrid, inclination_deg: f64, n_samples: usize, seed: u64, peak_percentile: f64) -> Result<ParReport> {
    let s: Vec<f64> = track_samples(counts, inclination_deg, n_samples, seed)?.iter().map(|t| t.count).collect();
    par_from_samples(&s, peak_percentile)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParPipeline {
    /// Threshold density in the reference region, when one was given.
    pub threshold: Option<f64>,
    pub rho_max: f64,
    pub coverage_half_angle_deg: f64,
    pub report: ParReport,
}

/// Threshold, cap, visible-subscriber convolution and track sampling in one
/// pass. `reference` is the region whose unserved population fixes the
/// threshold; it may be omitted when `params.rho_max` is set.
pub fn par_pipeline(world: &DensityGrid, reference: Option<&DensityGrid>, params: &ParParams) -> Result<(ParPipeline, DensityGrid)> {
    params.validate()?;
    let threshold = reference
        .map(|r| density_threshold(r, params.target_unserved_population, params.earth_radius_km))
        .transpose()?;
    let rho_max = match (params.rho_max, threshold) {
        (Some(r), _) => r,
        (None, Some(t)) => params.gamma * t,
        (None, None) => return Err(Error::param("rho_max", "needs either rho_max or a reference raster")),
    };
    let capped = cap_density(world, rho_max);
    let counts = visible_subscribers(&capped, params.altitude_km, params.min_elevation_deg, params.earth_radius_km)?;
    let report = par_estimate(&counts, params.inclination_deg, params.n_orbit_samples, params.rng_seed, params.peak_percentile)?;
    Ok((
        ParPipeline {
            threshold,
            rho_max,
            coverage_half_angle_deg: coverage_half_angle(params.earth_radius_km, params.altitude_km, params.min_elevation_deg) / DEG,
            report,
        },
        counts,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const R: f64 = EARTH_RADIUS_KM;

    #[test]
    fn uniform_synth() {
        let g = synth_density(&SynthSpec::Uniform { density: 10.0 }, 2.0, R).unwrap();
        assert_eq!((g.n_cols, g.n_rows), (180, 90));
        assert!(g.values.iter().all(|v| *v == 10.0));
        assert_relative_eq!(g.total_population(R), 10.0 * 4.0 * core::f64::consts::PI * R * R, max_relative = 1e-9);
    }

    #[test]
    fn zone_area_oracle() {
        let g = DensityGrid::global(1.0, 1.0).unwrap();
        for row in [0usize, 30, 89, 90, 150, 179] {
            let north = 90.0 - row as f64;
            let south = north - 1.0;
            let expect = R * R * (1.0f64).to_radians() * (north.to_radians().sin() - south.to_radians().sin());
            assert_relative_eq!(g.cell_area_km2(row, R), expect, max_relative = 1e-3);
        }
    }

    #[test]
    fn rejects_bad_rasters() {
        assert!(DensityGrid::global(0.7, 1.0).is_err());
        assert!(DensityGrid::new(2, 1, 1.0, 0.0, 0.0, vec![1.0, -1.0], vec![true; 2]).is_err());
        assert!(DensityGrid::new(2, 1, 1.0, 0.0, 0.0, vec![1.0, -1.0], vec![true, false]).is_ok());
        assert!(DensityGrid::new(2, 2, 1.0, 0.0, 0.0, vec![1.0; 3], vec![true; 3]).is_err());
    }

    #[test]
    fn locate_round_trip() {
        let g = DensityGrid::global(0.5, 0.0).unwrap();
        for (r, c) in [(0, 0), (10, 700), (359, 719), (180, 360)] {
            assert_eq!(g.locate(&g.center(r, c)), Some((r, c)));
        }
        assert_eq!(g.locate(&LatLon::new(-90.0, 0.0)).map(|x| x.0), Some(359));
    }

    fn two_bin() -> DensityGrid {
        // one equatorial row: low-density west half, dense east half
        let mut values = vec![5.0; 36];
        for v in values.iter_mut().skip(18) {
            *v = 50.0;
        }
        DensityGrid::new(36, 1, 10.0, -180.0, -5.0, values, vec![true; 36]).unwrap()
    }

    #[test]
    fn threshold_two_bin() {
        let g = two_bin();
        let area = g.cell_area_km2(0, R);
        let low = 18.0 * 5.0 * area;
        assert_eq!(density_threshold(&g, 0.5 * low, R).unwrap(), 5.0);
        assert_eq!(density_threshold(&g, low * (1.0 - 1e-9), R).unwrap(), 5.0);
        assert_eq!(density_threshold(&g, low * (1.0 + 1e-9), R).unwrap(), 50.0);
        let total = g.total_population(R);
        assert_eq!(density_threshold(&g, total, R).unwrap(), 50.0);
        assert!(matches!(density_threshold(&g, total * 1.01, R), Err(Error::Range(_))));
        let u = DensityGrid::global(5.0, 7.0).unwrap();
        let t = u.total_population(R);
        for f in [1e-6, 0.3, 0.999] {
            assert_eq!(density_threshold(&u, f * t, R).unwrap(), 7.0);
        }
    }

    #[test]
    fn capping() {
        let g = DensityGrid::global(10.0, 200.0).unwrap();
        assert!(cap_density(&g, 92.7).values.iter().all(|v| *v == 92.7));
        let low = DensityGrid::global(10.0, 3.0).unwrap();
        assert_eq!(cap_density(&low, 92.7), low);
    }

    #[test]
    fn uniform_counts_match_cap_area() {
        let rho = 4.0;
        let g = DensityGrid::global(0.25, rho).unwrap();
        let counts = visible_subscribers(&g, 550.0, 40.0, R).unwrap();
        let psi = coverage_half_angle(R, 550.0, 40.0);
        let cap = 2.0 * core::f64::consts::PI * R * R * (1.0 - cos(psi));
        for v in &counts.values {
            assert!((v / (rho * cap) - 1.0).abs() < 0.02, "{v} vs {}", rho * cap);
        }
        let par = par_estimate(&counts, 53.0, 20_000, 1, 99.9).unwrap();
        assert!((par.par - 1.0).abs() < 0.02, "{par:?}");
    }

    #[test]
    fn single_cell_indicator() {
        let mut g = DensityGrid::global(1.0, 0.0).unwrap();
        let (r0, c0) = (50, 100);
        let i = g.index(r0, c0);
        g.values[i] = 1.0;
        let counts = visible_subscribers(&g, 550.0, 40.0, R).unwrap();
        let psi = coverage_half_angle(R, 550.0, 40.0);
        let src = g.center(r0, c0);
        for r in 0..g.n_rows {
            for c in 0..g.n_cols {
                let inside = g.center(r, c).central_angle(&src) <= psi + 1e-12;
                let v = counts.values[g.index(r, c)];
                assert_eq!(v > 0.0, inside, "({r}, {c})");
            }
        }
        // wrap-around across the antimeridian
        let mut g = DensityGrid::global(1.0, 0.0).unwrap();
        let i = g.index(90, 0);
        g.values[i] = 1.0;
        let counts = visible_subscribers(&g, 550.0, 40.0, R).unwrap();
        assert!(counts.values[g.index(90, 359)] > 0.0);
        assert!(counts.values[g.index(90, 4)] > 0.0);
        assert_eq!(counts.values[g.index(90, 10)], 0.0);
    }

    #[test]
    fn hotspot_par_hand_count() {
        // counts: C on an equatorial band of rows, zero elsewhere; the track
        // fraction inside the band is (2/pi) asin(sin(b)/sin(i))
        let mut counts = DensityGrid::global(1.0, 0.0).unwrap();
        let band = 10.0;
        for r in 80..100 {
            for c in 0..360 {
                let i = counts.index(r, c);
                counts.values[i] = 3.0;
            }
        }
        let incl: f64 = 53.0;
        let frac = 2.0 / core::f64::consts::PI * asin(sin(band * DEG) / sin(incl * DEG));
        let rep = par_estimate(&counts, incl, 200_000, 5, 99.9).unwrap();
        assert_eq!(rep.peak, 3.0);
        assert!((rep.par * frac - 1.0).abs() < 0.02, "{} vs {}", rep.par, 1.0 / frac);
    }

    #[test]
    fn par_errors_and_floor() {
        let zero = DensityGrid::global(5.0, 0.0).unwrap();
        assert!(matches!(par_estimate(&zero, 53.0, 100, 0, 99.9), Err(Error::UndefinedRatio(_))));
        let mut s = vec![0.0; 10_000];
        s[0] = 1.0;
        let rep = par_from_samples(&s, 99.9).unwrap();
        assert_eq!(rep.par, 1.0);
    }

    #[test]
    fn pipeline_with_explicit_cap() {
        let world = synth_density(
            &SynthSpec::Hotspot { center: LatLon::new(30.0, 10.0), radius_km: 800.0, density: 500.0, background: 1.0 },
            1.0,
            R,
        )
        .unwrap();
        let params = ParParams { rho_max: Some(92.7), n_orbit_samples: 20_000, ..ParParams::default() };
        let (p, counts) = par_pipeline(&world, None, &params).unwrap();
        assert_eq!(p.rho_max, 92.7);
        assert!(p.report.par > 1.0);
        assert_eq!(counts.n_cols, world.n_cols);
        assert!(par_pipeline(&world, None, &ParParams::default()).is_err());
        let (q, _) = par_pipeline(&world, Some(&world), &ParParams { n_orbit_samples: 1000, target_unserved_population: 1e6, ..ParParams::default() }).unwrap();
        assert_eq!(q.threshold, Some(1.0));
        assert_relative_eq!(q.rho_max, 122.0 / 83.0, max_relative = 1e-12);
    }

    fn small_raster() -> impl Strategy<Value = DensityGrid> {
        proptest::collection::vec(0.0f64..500.0, 72 * 36).prop_map(|v| {
            let n = v.len();
            DensityGrid::new(72, 36, 5.0, -180.0, -90.0, v, vec![true; n]).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn cap_idempotent_and_dominated(g in small_raster(), cap in 0.0f64..600.0) {
            let c = cap_density(&g, cap);
            prop_assert_eq!(&cap_density(&c, cap), &c);
            for (a, b) in c.values.iter().zip(&g.values) {
                prop_assert!(a <= b);
                prop_assert_eq!(*a, b.min(cap));
            }
            prop_assert!(c.total_population(R) <= g.total_population(R));
        }

        #[test]
        fn threshold_monotone(g in small_raster(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let t = g.total_population(R);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(density_threshold(&g, lo * t, R).unwrap() <= density_threshold(&g, hi * t, R).unwrap());
        }

        #[test]
        fn counts_monotone_in_altitude(g in small_raster(), h in 300.0f64..1500.0, dh in 1.0f64..800.0) {
            let a = visible_subscribers(&g, h, 25.0, R).unwrap();
            let b = visible_subscribers(&g, h + dh, 25.0, R).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert!(y >= x);
            }
        }

        #[test]
        fn par_scale_invariant(g in small_raster(), k in 0.01f64..100.0) {
            let counts = visible_subscribers(&g, 1200.0, 25.0, R).unwrap();
            let mut scaled = counts.clone();
            for v in &mut scaled.values { *v *= k; }
            let a = par_estimate(&counts, 53.0, 2000, 3, 99.9);
            let b = par_estimate(&scaled, 53.0, 2000, 3, 99.9);
            if let (Ok(a), Ok(b)) = (a, b) {
                prop_assert!(a.par >= 1.0);
                prop_assert!((a.par - b.par).abs() <= 1e-9 * a.par);
            }
        }
    }
}
