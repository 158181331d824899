//! Circular-orbit constellations: propagation, line-of-sight geometry,
//! exclusion masks and goal-direction ranking.
//!
//! Orbits are two-body circles in an inertial frame; the Earth-fixed frame
//! rotates uniformly with the Greenwich meridian aligned to the inertial x axis
//! at t = 0. Shells use Walker-delta phasing.

use alloc::vec::Vec;

use libm::{acos, asin, atan2, cos, floor, sin, sqrt};
use serde::{Deserialize, Serialize};

use crate::geo::{coverage_half_angle, enu_direction, Enu, LatLon, Vec3, DEG};
use crate::grid::{Cell, CellId, GridParams};
use crate::{Error, Result, EARTH_ROTATION_RAD_S, GEO_RADIUS_KM, MU_EARTH_KM3_S2, SPEED_OF_LIGHT_KM_S};

pub type SvId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShellConfig {
    pub altitude_km: f64,
    pub inclination_deg: f64,
    pub n_planes: u32,
    pub sats_per_plane: u32,
    /// Span of right ascensions over which the planes are spread.
    #[serde(default = "default_raan_spread")]
    pub raan_spread_deg: f64,
    /// Along-track phase step between adjacent planes.
    #[serde(default)]
    pub phase_offset_deg: f64,
}

fn default_raan_spread() -> f64 {
    360.0
}

impl ShellConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.altitude_km > 0.0) {
            return Err(Error::param("altitude_km", "must be > 0"));
        }
        if !(0.0..=180.0).contains(&self.inclination_deg) {
            return Err(Error::param("inclination_deg", "must lie in [0, 180]"));
        }
        if self.n_planes == 0 || self.sats_per_plane == 0 {
            return Err(Error::param("n_planes", "shell must hold at least one SV"));
        }
        Ok(())
    }

    pub fn n_sats(&self) -> u32 {
        self.n_planes * self.sats_per_plane
    }

    /// Orbital period 2 pi sqrt(r^3 / mu), seconds.
    pub fn period_s(&self, earth_radius_km: f64) -> f64 {
        orbital_period(earth_radius_km + self.altitude_km)
    }
}

pub fn orbital_period(radius_km: f64) -> f64 {
    2.0 * core::f64::consts::PI * sqrt(radius_km * radius_km * radius_km / MU_EARTH_KM3_S2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstellationConfig {
    pub shells: Vec<ShellConfig>,
    pub n_beams: u16,
    pub n_channels: u16,
    /// Maximum simultaneous beam-channels per SV.
    pub n_bc: u16,
    /// Half-width of the exclusion band around the geostationary arc.
    #[serde(default = "default_geo_mask")]
    pub geo_mask_deg: f64,
}

fn default_geo_mask() -> f64 {
    5.0
}

impl Default for ConstellationConfig {
    fn default() -> Self {
        Self {
            shells: Vec::new(),
            n_beams: 15,
            n_channels: 76,
            n_bc: 264,
            geo_mask_deg: 5.0,
        }
    }
}

impl ConstellationConfig {
    pub fn validate(&self) -> Result<()> {
        for s in &self.shells {
            s.validate()?;
        }
        if self.n_beams == 0 || self.n_channels == 0 || self.n_bc == 0 {
            return Err(Error::param("n_beams", "beam, channel and beam-channel counts must be > 0"));
        }
        if self.n_bc as u32 > self.n_beams as u32 * self.n_channels as u32 {
            return Err(Error::param("n_bc", "cannot exceed n_beams * n_channels"));
        }
        if !(self.geo_mask_deg >= 0.0) {
            return Err(Error::param("geo_mask_deg", "must be >= 0"));
        }
        Ok(())
    }

    pub fn n_sats(&self) -> u32 {
        self.shells.iter().map(ShellConfig::n_sats).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvState {
    pub sv_id: SvId,
    /// Earth-fixed position, km.
    pub position: Vec3,
    /// Earth-fixed velocity, km/s.
    pub velocity: Vec3,
    pub epoch_s: f64,
}

impl SvState {
    pub fn subpoint(&self) -> LatLon {
        LatLon::from_vector(self.position)
    }
}

/// Positions of every SV at time `t_s`, ids assigned shell by shell, plane by plane.
pub fn propagate(config: &ConstellationConfig, earth_radius_km: f64, t_s: f64) -> Vec<SvState> {
    let theta = EARTH_ROTATION_RAD_S * t_s;
    let (ct, st) = (cos(theta), sin(theta));
    let omega_earth = Vec3::new(0.0, 0.0, EARTH_ROTATION_RAD_S);

    let mut out = Vec::with_capacity(config.n_sats() as usize);
    let mut id: SvId = 0;
    for shell in &config.shells {
        let r = earth_radius_km + shell.altitude_km;
        let mean_motion = sqrt(MU_EARTH_KM3_S2 / (r * r * r));
        let speed = r * mean_motion;
        let inc = shell.inclination_deg * DEG;
        let (ci, si) = (cos(inc), sin(inc));
        for p in 0..shell.n_planes {
            let raan = p as f64 * shell.raan_spread_deg / shell.n_planes as f64 * DEG;
            let (co, so) = (cos(raan), sin(raan));
            for s in 0..shell.sats_per_plane {
                let u0 = (s as f64 * 360.0 / shell.sats_per_plane as f64 + p as f64 * shell.phase_offset_deg) * DEG;
                let u = u0 + mean_motion * t_s;
                let (cu, su) = (cos(u), sin(u));
                let pos_i = Vec3::new(co * cu - so * su * ci, so * cu + co * su * ci, su * si) * r;
                let vel_i = Vec3::new(-co * su - so * cu * ci, -so * su + co * cu * ci, cu * si) * speed;
                // inertial -> Earth-fixed: rotate by -theta about z
                let rot = |v: Vec3| Vec3::new(ct * v.x + st * v.y, -st * v.x + ct * v.y, v.z);
                let position = rot(pos_i);
                let velocity = rot(vel_i) - omega_earth.cross(&position);
                out.push(SvState {
                    sv_id: id,
                    position,
                    velocity,
                    epoch_s: t_s,
                });
                id += 1;
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Exclusion {
    /// At or below the geometric horizon.
    Horizon,
    /// Above the horizon but below the minimum elevation mask.
    BelowMask,
    /// Too close to the geostationary arc.
    GeoArc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineOfSight {
    pub sv_id: SvId,
    pub elevation_deg: f64,
    pub azimuth_deg: f64,
    pub range_km: f64,
    pub excluded: Option<Exclusion>,
}

impl LineOfSight {
    pub fn is_excluded(&self) -> bool {
        self.excluded.is_some()
    }

    /// Unit line-of-sight vector in the observer's ENU frame.
    pub fn direction(&self) -> Vec3 {
        enu_direction(self.azimuth_deg, self.elevation_deg)
    }
}

/// Line of sight from a ground point to one SV, with exclusion masks applied.
pub fn line_of_sight(sv: &SvState, ground: &LatLon, params: &GridParams, geo_mask_deg: f64) -> LineOfSight {
    let p = ground.to_ecef(params.earth_radius_km);
    let frame = Enu::at(ground);
    let d = sv.position - p;
    let range = d.norm();
    let local = frame.project(&d) * (1.0 / range);
    let elevation_deg = asin(local.z.clamp(-1.0, 1.0)) / DEG;
    let mut azimuth_deg = atan2(local.x, local.y) / DEG;
    if azimuth_deg < 0.0 {
        azimuth_deg += 360.0;
    }
    let excluded = if elevation_deg <= 0.0 {
        Some(Exclusion::Horizon)
    } else if elevation_deg < params.min_elevation_deg {
        Some(Exclusion::BelowMask)
    } else if geo_mask_deg > 0.0 && near_geo_arc(&p, &d.normalized(), geo_mask_deg) {
        Some(Exclusion::GeoArc)
    } else {
        None
    };
    LineOfSight {
        sv_id: sv.sv_id,
        elevation_deg,
        azimuth_deg,
        range_km: range,
        excluded,
    }
}

/// True when `dir` passes within `mask_deg` of the geostationary arc.
pub fn near_geo_arc(ground: &Vec3, dir: &Vec3, mask_deg: f64) -> bool {
    // Every GEO direction seen from `ground` has a z component pinned between
    // two bounds, so the latitude difference gives a cheap lower bound.
    let rho = sqrt(ground.x * ground.x + ground.y * ground.y);
    let base = GEO_RADIUS_KM * GEO_RADIUS_KM + ground.norm() * ground.norm();
    let d_min = sqrt((base - 2.0 * GEO_RADIUS_KM * rho).max(0.0));
    let d_max = sqrt(base + 2.0 * GEO_RADIUS_KM * rho);
    let za = -ground.z / d_min.max(1e-9);
    let zb = -ground.z / d_max;
    let (lo, hi) = (asin(za.min(zb).clamp(-1.0, 1.0)), asin(za.max(zb).clamp(-1.0, 1.0)));
    let lat = asin(dir.z.clamp(-1.0, 1.0));
    let bound = if lat < lo { lo - lat } else if lat > hi { lat - hi } else { 0.0 };
    if bound / DEG >= mask_deg {
        return false;
    }
    geo_arc_separation_deg(ground, dir) < mask_deg
}

/// Smallest angle (deg) between `dir` (unit, Earth-fixed) seen from `ground`
/// and any point of the geostationary arc.
pub fn geo_arc_separation_deg(ground: &Vec3, dir: &Vec3) -> f64 {
    let angle_to = |lam: f64| {
        let g = Vec3::new(GEO_RADIUS_KM * cos(lam), GEO_RADIUS_KM * sin(lam), 0.0);
        let v = (g - *ground).normalized();
        acos(v.dot(dir).clamp(-1.0, 1.0))
    };
    const COARSE: usize = 180;
    let step = 2.0 * core::f64::consts::PI / COARSE as f64;
    let mut best_lam = 0.0;
    let mut best = f64::INFINITY;
    for k in 0..COARSE {
        let lam = k as f64 * step;
        let a = angle_to(lam);
        if a < best {
            best = a;
            best_lam = lam;
        }
    }
    // golden-section refinement around the coarse minimum
    let (mut lo, mut hi) = (best_lam - step, best_lam + step);
    let g = 0.618_033_988_749_895;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (angle_to(x1), angle_to(x2));
    for _ in 0..40 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = angle_to(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = angle_to(x2);
        }
    }
    best.min(f1).min(f2) / DEG
}

/// Evaluates the line of sight from `cell` to every SV in `states`.
pub fn visible_svs(states: &[SvState], cell: &Cell, params: &GridParams, geo_mask_deg: f64) -> Vec<LineOfSight> {
    states
        .iter()
        .map(|sv| line_of_sight(sv, &cell.center, params, geo_mask_deg))
        .collect()
}

/// Goal directions in the local ENU frame: zenith, then north, east, south,
/// west at `goal_elevation_deg`, then extra directions spread evenly in azimuth.
pub fn goal_directions(n: usize, goal_elevation_deg: f64) -> Vec<Vec3> {
    let mut goals = Vec::with_capacity(n);
    for s in 0..n {
        let dir = match s {
            0 => Vec3::new(0.0, 0.0, 1.0),
            1..=4 => enu_direction((s - 1) as f64 * 90.0, goal_elevation_deg),
            _ => {
                let extra = (n - 5) as f64;
                enu_direction(45.0 + (s - 5) as f64 * 360.0 / extra, goal_elevation_deg)
            }
        };
        goals.push(dir);
    }
    goals
}

/// Orders the usable SVs of one cell for each signal index. Entry `s` of the
/// result lists SV ids by descending alignment with goal direction `s`
/// (ties by ascending id).
pub fn select_diverse(
    visible: &[LineOfSight],
    n: usize,
    goal_elevation_deg: f64,
    cell_id: CellId,
) -> Result<Vec<Vec<SvId>>> {
    if n < 4 {
        return Err(Error::param("n", "at least 4 signals per cell are required"));
    }
    rank_by_goals(visible, n, goal_elevation_deg, cell_id)
}

pub(crate) fn rank_by_goals(
    visible: &[LineOfSight],
    n: usize,
    goal_elevation_deg: f64,
    cell_id: CellId,
) -> Result<Vec<Vec<SvId>>> {
    let usable: Vec<(SvId, Vec3)> = visible
        .iter()
        .filter(|l| !l.is_excluded())
        .map(|l| (l.sv_id, l.direction()))
        .collect();
    if usable.len() < n {
        return Err(Error::InsufficientVisibility {
            cell_id,
            available: usable.len(),
            required: n,
        });
    }
    Ok(goal_directions(n, goal_elevation_deg)
        .iter()
        .map(|goal| {
            let mut scored: Vec<(f64, SvId)> = usable.iter().map(|(id, d)| (d.dot(goal), *id)).collect();
            scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            scored.into_iter().map(|(_, id)| id).collect()
        })
        .collect())
}

/// Earliest time (seconds) at which a burst from `sv` reaches any part of the
/// cell, approximating the cell by its centre and six vertices.
pub fn flight_time(sv: &SvState, cell: &Cell, params: &GridParams) -> Result<f64> {
    let center = cell.center.to_ecef(params.earth_radius_km);
    let up = cell.center.unit();
    if (sv.position - center).dot(&up) <= 0.0 {
        return Err(Error::BelowHorizon {
            sv_id: sv.sv_id,
            cell_id: cell.id,
        });
    }
    let vertex_arc = params.cell_diameter_km / 2.0 / params.earth_radius_km;
    let mut best = (sv.position - center).norm();
    if vertex_arc > 0.0 {
        for k in 0..6 {
            let v = cell.center.destination(k as f64 * 60.0, vertex_arc);
            best = best.min((sv.position - v.to_ecef(params.earth_radius_km)).norm());
        }
    }
    Ok(best / SPEED_OF_LIGHT_KM_S)
}

/// Bucket index over SV sub-satellite points for fast per-cell candidate lookup.
#[derive(Debug, Clone)]
pub struct VisibilityIndex {
    bin_deg: f64,
    n_lat: usize,
    n_lon: usize,
    bins: Vec<Vec<u32>>,
    /// Largest Earth-central angle at which any SV can clear the elevation mask.
    reach_rad: f64,
}

impl VisibilityIndex {
    pub fn new(states: &[SvState], config: &ConstellationConfig, params: &GridParams) -> Self {
        let reach_rad = config
            .shells
            .iter()
            .map(|s| coverage_half_angle(params.earth_radius_km, s.altitude_km, params.min_elevation_deg))
            .fold(0.0, f64::max);
        let bin_deg = 2.0;
        let n_lat = (180.0 / bin_deg) as usize;
        let n_lon = (360.0 / bin_deg) as usize;
        let mut bins = alloc::vec![Vec::new(); n_lat * n_lon];
        for (i, sv) in states.iter().enumerate() {
            let sp = sv.subpoint();
            bins[Self::bin_of(bin_deg, n_lat, n_lon, &sp)].push(i as u32);
        }
        Self {
            bin_deg,
            n_lat,
            n_lon,
            bins,
            reach_rad,
        }
    }

    fn bin_of(bin_deg: f64, n_lat: usize, n_lon: usize, p: &LatLon) -> usize {
        let i = (floor((p.lat_deg + 90.0) / bin_deg) as usize).min(n_lat - 1);
        let j = (floor((p.lon_deg + 180.0) / bin_deg) as usize).min(n_lon - 1);
        i * n_lon + j
    }

    /// Indices into the state slice of SVs that may clear the elevation mask at `p`.
    pub fn candidates(&self, p: &LatLon) -> Vec<u32> {
        let reach_deg = self.reach_rad / DEG + self.bin_deg;
        let lat_lo = ((p.lat_deg - reach_deg + 90.0) / self.bin_deg).max(0.0) as usize;
        let lat_hi = (((p.lat_deg + reach_deg + 90.0) / self.bin_deg) as usize).min(self.n_lat - 1);
        let mut out = Vec::new();
        for i in lat_lo..=lat_hi {
            let band_lat = (i as f64 + 0.5) * self.bin_deg - 90.0;
            let worst_lat = (band_lat.abs() + self.bin_deg).min(90.0).max(p.lat_deg.abs());
            let cos_lat = cos(worst_lat * DEG);
            let all = worst_lat + reach_deg >= 89.0 || cos_lat < 1e-6 || reach_deg / cos_lat >= 180.0;
            if all {
                for j in 0..self.n_lon {
                    out.extend_from_slice(&self.bins[i * self.n_lon + j]);
                }
                continue;
            }
            let half = (reach_deg / cos_lat / self.bin_deg) as i64 + 1;
            let jc = floor((p.lon_deg + 180.0) / self.bin_deg) as i64;
            for dj in -half..=half {
                let j = (jc + dj).rem_euclid(self.n_lon as i64) as usize;
                out.extend_from_slice(&self.bins[i * self.n_lon + j]);
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Lines of sight from `cell` to the candidate SVs only. Every SV left out
    /// is certainly below the elevation mask.
    pub fn visible_from(
        &self,
        states: &[SvState],
        cell: &Cell,
        params: &GridParams,
        geo_mask_deg: f64,
    ) -> Vec<LineOfSight> {
        self.candidates(&cell.center)
            .into_iter()
            .map(|i| line_of_sight(&states[i as usize], &cell.center, params, geo_mask_deg))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::slant_range;
    use crate::grid::build_cell_grid;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const R: f64 = 6371.0;

    fn one_shell(h: f64, inc: f64, planes: u32, per: u32) -> ConstellationConfig {
        ConstellationConfig {
            shells: alloc::vec![ShellConfig {
                altitude_km: h,
                inclination_deg: inc,
                n_planes: planes,
                sats_per_plane: per,
                raan_spread_deg: 360.0,
                phase_offset_deg: 7.0,
            }],
            ..ConstellationConfig::default()
        }
    }

    fn cell_at(lat: f64, lon: f64) -> Cell {
        Cell {
            id: 0,
            center: LatLon::new(lat, lon),
            neighbor_ids: Vec::new(),
        }
    }

    fn sv_at(id: SvId, pos: Vec3) -> SvState {
        SvState {
            sv_id: id,
            position: pos,
            velocity: Vec3::default(),
            epoch_s: 0.0,
        }
    }

    #[test]
    fn period_at_550km() {
        // 2 pi sqrt(6921^3 / 398600.4418)
        assert_relative_eq!(orbital_period(R + 550.0), 5730.127, epsilon = 1e-2);
    }

    #[test]
    fn inertial_periodicity() {
        let cfg = one_shell(550.0, 0.0, 1, 1);
        let period = cfg.shells[0].period_s(R);
        let s0 = propagate(&cfg, R, 0.0)[0];
        let s1 = propagate(&cfg, R, period)[0];
        // Earth-fixed position moved by the Earth's rotation over one period.
        let theta = EARTH_ROTATION_RAD_S * period;
        let expected = Vec3::new(
            cos(theta) * s0.position.x + sin(theta) * s0.position.y,
            -sin(theta) * s0.position.x + cos(theta) * s0.position.y,
            s0.position.z,
        );
        assert!((s1.position - expected).norm() < 1e-6);
        assert!((s1.position - s0.position).norm() > 1.0);
    }

    #[test]
    fn radius_constant_over_one_period() {
        let cfg = one_shell(550.0, 53.0, 3, 4);
        let period = cfg.shells[0].period_s(R);
        for k in 0..=20 {
            for s in propagate(&cfg, R, period * k as f64 / 20.0) {
                assert!((s.position.norm() - (R + 550.0)).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn antipodal_pair_in_plane() {
        let cfg = one_shell(800.0, 45.0, 1, 2);
        let s = propagate(&cfg, R, 123.0);
        assert!((s[0].position + s[1].position).norm() < 1e-6);
    }

    #[test]
    fn velocity_matches_finite_difference() {
        let cfg = one_shell(550.0, 53.0, 2, 2);
        let dt = 1e-3;
        let a = propagate(&cfg, R, 100.0);
        let b = propagate(&cfg, R, 100.0 + dt);
        for (x, y) in a.iter().zip(&b) {
            let fd = (y.position - x.position) * (1.0 / dt);
            assert!((fd - x.velocity).norm() < 1e-3);
        }
    }

    #[test]
    fn zenith_sv_is_visible() {
        let params = GridParams::default();
        let c = cell_at(20.0, 30.0);
        let sv = sv_at(0, c.center.to_ecef(R + 550.0));
        let los = line_of_sight(&sv, &c.center, &params, 5.0);
        assert_relative_eq!(los.elevation_deg, 90.0, epsilon = 1e-6);
        assert_relative_eq!(los.range_km, 550.0, epsilon = 1e-6);
        assert!(!los.is_excluded());
    }

    #[test]
    fn below_horizon_and_mask() {
        let params = GridParams::default();
        let c = cell_at(0.0, 0.0);
        let far = sv_at(0, LatLon::new(0.0, 60.0).to_ecef(R + 550.0));
        assert_eq!(line_of_sight(&far, &c.center, &params, 0.0).excluded, Some(Exclusion::Horizon));
        // About 10 deg of arc away at 550 km: above horizon, below 40 deg.
        let low = sv_at(1, LatLon::new(10.0, 0.0).to_ecef(R + 550.0));
        let l = line_of_sight(&low, &c.center, &params, 0.0);
        assert!(l.elevation_deg > 0.0 && l.elevation_deg < 40.0);
        assert_eq!(l.excluded, Some(Exclusion::BelowMask));
    }

    #[test]
    fn geo_arc_exclusion() {
        // From the equator, a zenith SV sits on the line of sight to the GEO arc.
        let params = GridParams::default();
        let c = cell_at(0.0, 10.0);
        let sv = sv_at(0, c.center.to_ecef(R + 550.0));
        assert_eq!(line_of_sight(&sv, &c.center, &params, 5.0).excluded, Some(Exclusion::GeoArc));
        assert_eq!(line_of_sight(&sv, &c.center, &params, 0.0).excluded, None);
        // At 50 deg N the zenith is far from the arc.
        let c = cell_at(50.0, 10.0);
        let sv = sv_at(0, c.center.to_ecef(R + 550.0));
        let sep = geo_arc_separation_deg(&c.center.to_ecef(R), &c.center.unit());
        assert!(sep > 40.0);
        assert_eq!(line_of_sight(&sv, &c.center, &params, 5.0).excluded, None);
    }

    /// Independent topocentric oracle: rotate ECEF into ENU via explicit
    /// rotation matrix built from lat/lon, then take asin(up / range).
    fn oracle_elevation(sv: &Vec3, lat: f64, lon: f64) -> f64 {
        let (phi, lam) = (lat.to_radians(), lon.to_radians());
        let g = Vec3::new(R * phi.cos() * lam.cos(), R * phi.cos() * lam.sin(), R * phi.sin());
        let d = *sv - g;
        let up = phi.cos() * lam.cos() * d.x + phi.cos() * lam.sin() * d.y + phi.sin() * d.z;
        (up / d.norm()).asin().to_degrees()
    }

    #[test]
    fn geo_prefilter_agrees_with_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..3000 {
            let g = LatLon::new(rng.gen_range(-60.0..60.0), rng.gen_range(-180.0..180.0));
            let dir = enu_direction(rng.gen_range(0.0..360.0), rng.gen_range(0.0..90.0));
            let f = Enu::at(&g);
            let world = Vec3::new(
                f.east.x * dir.x + f.north.x * dir.y + f.up.x * dir.z,
                f.east.y * dir.x + f.north.y * dir.y + f.up.y * dir.z,
                f.east.z * dir.x + f.north.z * dir.y + f.up.z * dir.z,
            );
            let p = g.to_ecef(R);
            for mask in [1.0, 5.0, 15.0] {
                assert_eq!(near_geo_arc(&p, &world, mask), geo_arc_separation_deg(&p, &world) < mask);
            }
        }
    }

    #[test]
    fn elevation_matches_topocentric_oracle() {
        let params = GridParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let (lat, lon) = (rng.gen_range(-60.0..60.0), rng.gen_range(-180.0..180.0));
            let sp = LatLon::new(lat + rng.gen_range(-15.0..15.0), lon + rng.gen_range(-15.0..15.0));
            let sv = sv_at(0, sp.to_ecef(R + rng.gen_range(400.0..1400.0)));
            let los = line_of_sight(&sv, &LatLon::new(lat, lon), &params, 0.0);
            assert_relative_eq!(los.elevation_deg, oracle_elevation(&sv.position, lat, lon), epsilon = 1e-9);
        }
    }

    #[test]
    fn raising_mask_never_grows_visible_set() {
        let cfg = one_shell(550.0, 53.0, 24, 24);
        let states = propagate(&cfg, R, 0.0);
        let c = cell_at(40.0, -100.0);
        let mut last = usize::MAX;
        for e in [10.0, 20.0, 30.0, 40.0, 50.0] {
            let p = GridParams {
                min_elevation_deg: e,
                ..GridParams::default()
            };
            let n = visible_svs(&states, &c, &p, 5.0).iter().filter(|l| !l.is_excluded()).count();
            assert!(n <= last);
            last = n;
        }
    }

    fn los(id: SvId, az: f64, el: f64) -> LineOfSight {
        LineOfSight {
            sv_id: id,
            elevation_deg: el,
            azimuth_deg: az,
            range_km: 1000.0,
            excluded: None,
        }
    }

    #[test]
    fn select_diverse_fixed_point() {
        let vis = alloc::vec![los(4, 270.0, 45.0), los(3, 180.0, 45.0), los(2, 90.0, 45.0), los(1, 0.0, 45.0), los(0, 0.0, 90.0)];
        let ranks = select_diverse(&vis, 5, 45.0, 0).unwrap();
        for (s, r) in ranks.iter().enumerate() {
            assert_eq!(r[0], s as SvId);
            assert_eq!(r.len(), 5);
        }
    }

    #[test]
    fn select_diverse_errors() {
        let vis = alloc::vec![los(0, 0.0, 90.0), los(1, 0.0, 50.0)];
        assert!(matches!(
            select_diverse(&vis, 5, 45.0, 9),
            Err(Error::InsufficientVisibility { cell_id: 9, available: 2, required: 5 })
        ));
        assert!(select_diverse(&vis, 3, 45.0, 9).is_err());
    }

    #[test]
    fn select_diverse_matches_brute_force_sort() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..50 {
            let k = rng.gen_range(5..30);
            let mut vis: Vec<LineOfSight> = (0..k)
                .map(|i| los(i, rng.gen_range(0.0..360.0), rng.gen_range(1.0..90.0)))
                .collect();
            for v in vis.iter_mut().take(3) {
                v.excluded = Some(Exclusion::GeoArc);
            }
            let n = rng.gen_range(4..8);
            if k - 3 < n {
                continue;
            }
            let ranks = select_diverse(&vis, n as usize, 45.0, 0).unwrap();
            for (s, r) in ranks.iter().enumerate() {
                // brute force: dot products against explicitly constructed goals
                let (gaz, gel): (f64, f64) = match s {
                    0 => (0.0, 90.0),
                    1..=4 => ((s - 1) as f64 * 90.0, 45.0),
                    _ => (45.0 + (s - 5) as f64 * 360.0 / (n - 5) as f64, 45.0),
                };
                let g = [gaz.to_radians().sin() * gel.to_radians().cos(), gaz.to_radians().cos() * gel.to_radians().cos(), gel.to_radians().sin()];
                let mut expect: Vec<(f64, u32)> = vis
                    .iter()
                    .filter(|v| v.excluded.is_none())
                    .map(|v| {
                        let (a, e) = (v.azimuth_deg.to_radians(), v.elevation_deg.to_radians());
                        (a.sin() * e.cos() * g[0] + a.cos() * e.cos() * g[1] + e.sin() * g[2], v.sv_id)
                    })
                    .collect();
                expect.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
                let ids: Vec<u32> = expect.into_iter().map(|x| x.1).collect();
                assert_eq!(r, &ids);
            }
        }
    }

    #[test]
    fn flight_time_examples() {
        let params = GridParams::default();
        let c = cell_at(10.0, 10.0);
        let zenith = sv_at(0, c.center.to_ecef(R + 550.0));
        let t = flight_time(&zenith, &c, &params).unwrap();
        assert!(t <= 550.0 / SPEED_OF_LIGHT_KM_S + 1e-12);
        assert_relative_eq!(550.0 / SPEED_OF_LIGHT_KM_S * 1e3, 1.834_6, epsilon = 1e-4);

        let point = Cell {
            id: 0,
            center: c.center,
            neighbor_ids: Vec::new(),
        };
        let zero = GridParams {
            cell_diameter_km: 0.0,
            ..params
        };
        // SV at 40 deg elevation toward the north: slant range by the law of cosines.
        let psi = coverage_half_angle(R, 550.0, 40.0);
        let sv = sv_at(1, c.center.destination(0.0, psi).to_ecef(R + 550.0));
        let los = line_of_sight(&sv, &c.center, &params, 0.0);
        assert_relative_eq!(los.elevation_deg, 40.0, epsilon = 1e-9);
        let slant = slant_range(R, 550.0, 40.0);
        assert_relative_eq!(slant, 812.066, epsilon = 1e-3);
        let t = flight_time(&sv, &point, &zero).unwrap();
        assert_relative_eq!(t, slant / SPEED_OF_LIGHT_KM_S, max_relative = 1e-12);
        assert_relative_eq!(t * 1e3, 2.708_76, epsilon = 1e-4);

        let below = sv_at(2, LatLon::new(10.0, 100.0).to_ecef(R + 550.0));
        assert!(matches!(flight_time(&below, &c, &params), Err(Error::BelowHorizon { .. })));
    }

    #[test]
    fn flight_time_bounded_for_visible_svs() {
        let params = GridParams::default();
        let cfg = one_shell(550.0, 53.0, 30, 30);
        let grid = build_cell_grid(GridParams {
            cell_diameter_km: 500.0,
            ..params
        })
        .unwrap();
        let states = propagate(&cfg, R, 0.0);
        let hi = slant_range(R, 550.0, 40.0) / SPEED_OF_LIGHT_KM_S;
        let lo_center = 550.0 / SPEED_OF_LIGHT_KM_S;
        let d_over_c = 250.0 / SPEED_OF_LIGHT_KM_S;
        for cell in grid.cells().iter().step_by(13) {
            for l in visible_svs(&states, cell, &params, 0.0).iter().filter(|l| !l.is_excluded()) {
                let t = flight_time(&states[l.sv_id as usize], cell, &params).unwrap();
                // cell vertices may sit closer than the altitude; allow that slack below
                assert!(t >= lo_center - d_over_c && t <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn index_candidates_cover_all_visible() {
        let cfg = ConstellationConfig {
            shells: alloc::vec![
                ShellConfig { altitude_km: 550.0, inclination_deg: 53.0, n_planes: 20, sats_per_plane: 20, raan_spread_deg: 360.0, phase_offset_deg: 3.0 },
                ShellConfig { altitude_km: 1200.0, inclination_deg: 88.0, n_planes: 10, sats_per_plane: 20, raan_spread_deg: 180.0, phase_offset_deg: 0.0 },
            ],
            ..ConstellationConfig::default()
        };
        let params = GridParams {
            min_elevation_deg: 10.0,
            lat_max_deg: 80.0,
            cell_diameter_km: 700.0,
            ..GridParams::default()
        };
        let grid = build_cell_grid(params).unwrap();
        let states = propagate(&cfg, R, 321.0);
        let index = VisibilityIndex::new(&states, &cfg, &params);
        for cell in grid.cells() {
            let full: Vec<u32> = visible_svs(&states, cell, &params, 0.0)
                .iter()
                .filter(|l| !l.is_excluded())
                .map(|l| l.sv_id)
                .collect();
            let fast: Vec<u32> = index
                .visible_from(&states, cell, &params, 0.0)
                .iter()
                .filter(|l| !l.is_excluded())
                .map(|l| l.sv_id)
                .collect();
            assert_eq!(full, fast, "cell {}", cell.id);
        }
    }
}
